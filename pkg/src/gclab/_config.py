import os

DEFAULT_CAP = 10**6


class CapExceeded(RuntimeError):
    def __init__(self, count, cap, what="enumeration"):
        self.count = count
        self.cap = cap
        super().__init__(f"{what} would generate {count} items, cap is {cap}")


def enumeration_cap(cap=None) -> int:
    """Explicit cap, else $GCLAB_CAP, else 10**6."""
    if cap is not None:
        return int(cap)
    env = os.environ.get("GCLAB_CAP")
    if env:
        return int(float(env))
    return DEFAULT_CAP
