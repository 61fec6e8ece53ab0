"""Exception types shared across the package."""


class NumericalFault(RuntimeError):
    """A non-finite value surfaced where the math guarantees finiteness.

    Raised with enough context (step index, offending quantity) to locate
    the fault; never caught internally.
    """
