"""Network-variant descriptors: observation/action spaces, architectures and
environment behaviors tied to each reward table entry."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import VariantMismatch
from .perception import ObsVariant, observation_dim
from .rewards import VARIANT_COMPONENTS


@dataclass(frozen=True)
class VariantSpec:
    name: str
    num_mavs: int
    obs_variant: ObsVariant
    action_dim: int              # 3 when yaw is handled by a separate servo
    hidden: tuple[int, int]
    static_subject: bool
    yaw_servo: bool              # environment orients the agent at the person
    env_potential_field: bool    # avoidance applied by the environment, not the reward

    @property
    def obs_dim(self) -> int:
        return observation_dim(self.obs_variant)

    @property
    def state_dim(self) -> int:
        # per-MAV position + yaw, then person root + body yaw
        return 4 * self.num_mavs + 4

    @property
    def components(self) -> tuple[str, ...]:
        return VARIANT_COMPONENTS[self.name]


_SINGLE = dict(num_mavs=1, obs_variant=ObsVariant.SINGLE, action_dim=4,
               hidden=(64, 64), static_subject=False, yaw_servo=False,
               env_potential_field=False)

VARIANT_SPECS = {
    "1.1": VariantSpec(name="1.1", **_SINGLE),
    "1.2": VariantSpec(name="1.2", **_SINGLE),
    "1.3": VariantSpec(name="1.3", **_SINGLE),
    "1.4": VariantSpec(name="1.4", **_SINGLE),
    "2.1": VariantSpec(name="2.1", num_mavs=2, obs_variant=ObsVariant.MULTI_STATIC,
                       action_dim=3, hidden=(256, 256), static_subject=True,
                       yaw_servo=True, env_potential_field=False),
    "2.2": VariantSpec(name="2.2", num_mavs=2, obs_variant=ObsVariant.MULTI_STATIC,
                       action_dim=3, hidden=(256, 256), static_subject=True,
                       yaw_servo=True, env_potential_field=False),
    "2.3": VariantSpec(name="2.3", num_mavs=2, obs_variant=ObsVariant.MULTI,
                       action_dim=4, hidden=(256, 256), static_subject=False,
                       yaw_servo=False, env_potential_field=False),
    "2.4": VariantSpec(name="2.4", num_mavs=2, obs_variant=ObsVariant.MULTI,
                       action_dim=4, hidden=(256, 256), static_subject=False,
                       yaw_servo=False, env_potential_field=True),
}


def get_variant(name: str) -> VariantSpec:
    try:
        return VARIANT_SPECS[name]
    except KeyError:
        raise VariantMismatch(
            f"unknown variant {name!r}; expected one of {sorted(VARIANT_SPECS)}") from None
