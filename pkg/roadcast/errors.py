"""
roadcast — Errors
Each error carries a machine-parsable code; the CLI prints
`ERROR <CODE>: <message>` and exits with the matching status.
"""
from typing import Optional

USAGE = "USAGE"
PARSE = "PARSE"
INFEASIBLE = "INFEASIBLE"
CAP_EXCEEDED = "CAP_EXCEEDED"
IO = "IO"
NUMERIC = "NUMERIC"

EXIT_CODES = {
    USAGE: 2,
    PARSE: 3,
    INFEASIBLE: 4,
    CAP_EXCEEDED: 5,
    IO: 6,
    NUMERIC: 7,
}


class RoadcastError(Exception):
    code = NUMERIC

    def __str__(self) -> str:
        return self.args[0] if self.args else self.__class__.__name__

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.code]


class ParseError(RoadcastError):
    code = PARSE

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class UnknownIdError(ParseError):
    pass


class DisconnectedNetworkError(ParseError):
    pass


class DegenerateEdgeError(ParseError):
    pass


class PartitionError(RoadcastError):
    code = NUMERIC

    def __init__(self, message: str, edge_id: str, site_id: str):
        self.edge_id = edge_id
        self.site_id = site_id
        super().__init__(f"edge {edge_id}, site {site_id}: {message}")


class NoQualifyingPairError(RoadcastError):
    code = INFEASIBLE


class InfeasibleTargetError(RoadcastError):
    code = INFEASIBLE

    def __init__(self, message: str, achievable: Optional[float] = None):
        self.achievable = achievable
        if achievable is not None:
            message = f"{message} (max achievable {float(achievable):.6g})"
        super().__init__(message)


class CapExceededError(RoadcastError):
    code = CAP_EXCEEDED


class NumericError(RoadcastError):
    code = NUMERIC


class InputError(RoadcastError):
    code = IO


class UsageError(RoadcastError):
    code = USAGE
