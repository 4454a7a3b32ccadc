from __future__ import annotations

from hypothesis import HealthCheck, settings

# Property tests share one profile: no wall-clock deadline (CI jitter) and a
# bounded example count so the whole suite stays fast.
settings.register_profile(
    "reportsmith",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("reportsmith")
