class ValidationError(ValueError):
    """Bad user input: malformed files, out-of-range parameters, mismatched keys."""


class FleetBudgetExceeded(RuntimeError):
    """More proxy trainings failed than the fleet's failure budget allows."""

    def __init__(self, failed: int, total: int):
        super().__init__(f"{failed}/{total} proxy runs failed")
        self.failed = failed
        self.total = total
