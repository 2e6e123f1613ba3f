"""Shared exception types, mapped to CLI exit codes in semtx.cli."""


class FormatError(ValueError):
    """A byte stream violates one of the binary container layouts."""


class CapacityError(RuntimeError):
    """A frame's payload section exceeds the channel byte budget."""

    def __init__(self, payload_bytes: int, budget_bytes: int):
        self.payload_bytes = payload_bytes
        self.budget_bytes = budget_bytes
        super().__init__(
            f"payload section is {payload_bytes} bytes, channel budget is {budget_bytes}"
        )
