from hypothesis import HealthCheck, settings

settings.register_profile(
    "sbs",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
    derandomize=True,
)
settings.load_profile("sbs")
