import pydantic


class UnitSystem(pydantic.BaseModel):
    """
    Physical constants threaded through every operation that needs them.

    Args:
        hbar: Reduced Planck constant.
        k_b: Boltzmann constant.
    """
    model_config = pydantic.ConfigDict(frozen=True)

    hbar: pydantic.PositiveFloat = 1.0
    k_b: pydantic.PositiveFloat = 1.0


DEFAULT_UNITS = UnitSystem()
