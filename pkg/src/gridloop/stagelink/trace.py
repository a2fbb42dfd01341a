"""Run traces: the unit of comparison across testing-chain stages.

A trace holds one state row per simulation step (the CSV export), one record
per control cycle (measurement snapshot, commands issued and delivered) and
one record per message that crossed the coupling boundary. The msg_events /
verdict_events CSV columns carry anomalies only (drops, timeouts, probe
verdicts, controller flags) so that runs over ideal couplings compare
byte-identical across stages.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

CSV_COLUMNS = (
    "t_s", "f_hz", "v_pu", "p_load_kw", "p_pv_kw", "p_diesel_kw",
    "p_batt1_kw", "p_batt2_kw", "soc1", "soc2", "breaker_main",
    "bank_mask", "pv_curtail_kw", "msg_events", "verdict_events",
)
N_NUMERIC = 13  # leading numeric columns of a state row


@dataclass
class CycleRecord:
    index: int
    t_s: float
    meas_block: tuple            # 16 register values as published
    issued: tuple | None         # ((addr, value), ...) or None if controller silent
    applied_t_s: float | None    # virtual time the command write took effect
    controller_node: str | None = None
    controller_events: tuple = ()


@dataclass
class MessageRecord:
    cycle: int
    direction: str               # "up" (measurements) or "down" (commands)
    kind: str                    # frame type name
    n_bytes: int
    t_send: float
    status: str                  # "delivered" or "dropped"
    t_arrive: float | None
    latency_s: float | None


@dataclass
class RunEvent:
    t_s: float
    kind: str                    # "timeout", "drop", "abort", "verdict", "flag"
    detail: str


class SchemaMismatch(Exception):
    pass


@dataclass
class Trace:
    meta: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)          # tuples: 13 floats + 2 strings
    cycles: list = field(default_factory=list)
    messages: list = field(default_factory=list)
    events: list = field(default_factory=list)
    phil_rows: list = field(default_factory=list)     # (t_s, v_interface, i_interface)

    def add_row(self, numeric: tuple, msg_events: str = "", verdict_events: str = ""):
        self.rows.append(tuple(numeric) + (msg_events, verdict_events))

    def message_counts(self) -> dict:
        sent = len(self.messages)
        delivered = sum(1 for m in self.messages if m.status == "delivered")
        return {"sent": sent, "delivered": delivered, "dropped": sent - delivered}

    def command_sequence(self) -> list:
        return [c.issued for c in self.cycles if c.issued is not None]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(CSV_COLUMNS) + "\n")
        for row in self.rows:
            cells = [repr(v) for v in row[:N_NUMERIC]] + [row[N_NUMERIC], row[N_NUMERIC + 1]]
            buf.write(",".join(cells) + "\n")
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_csv())
