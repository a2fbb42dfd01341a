"""Register map shared by plant and controller, and the typed views over it.

32 registers, each carried on the wire as one binary64 value. Registers 0-15
are measurements (written by the plant, read-only for the controller);
16-31 are commands (written by the controller). One reserved command slot is
assigned to the frequency trim needed while synchronizing a formed island
back onto the main grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

# measurement block
REG_F_HZ = 0
REG_V_PU = 1
REG_P_LOAD = 2
REG_P_PV = 3
REG_P_DIESEL = 4
REG_P_BATT1 = 5
REG_P_BATT2 = 6
REG_SOC1 = 7
REG_SOC2 = 8
REG_BREAKER_MAIN = 9
REG_DF_HZ = 10
REG_DV_PU = 11
REG_DTHETA_RAD = 12
REG_DIESEL_RATIO = 13
# 14, 15 reserved

# command block
REG_BANK_MASK = 16
REG_PV_CURTAIL_KW = 17
REG_BATT2_SETPOINT_KW = 18
REG_BREAKER_CMD = 19
REG_PROTECTION_GROUP = 20
REG_BLACKSTART_ACK = 21
REG_FREQ_TRIM_HZ = 22
# 23..31 reserved

MEAS_BASE = 0
CMD_BASE = 16
BLOCK_LEN = 16
N_REGS = 32

COMMAND_REG_NAMES = {
    REG_BANK_MASK: "bank_mask",
    REG_PV_CURTAIL_KW: "pv_curtail_kw",
    REG_BATT2_SETPOINT_KW: "batt2_setpoint_kw",
    REG_BREAKER_CMD: "breaker_cmd",
    REG_PROTECTION_GROUP: "protection_group",
    REG_BLACKSTART_ACK: "blackstart_ack",
    REG_FREQ_TRIM_HZ: "freq_trim_hz",
}


class RegisterAccessError(Exception):
    pass


class RegisterMap:
    """Plant-side register bank. Controller writes to the measurement block
    are rejected; command registers hold the last written value."""

    def __init__(self, initial_commands: list[float] | None = None):
        self.values = [0.0] * N_REGS
        if initial_commands is not None:
            if len(initial_commands) != BLOCK_LEN:
                raise ValueError("initial command block must have 16 values")
            self.values[CMD_BASE:N_REGS] = [float(v) for v in initial_commands]

    def set_measurements(self, meas_block: list[float]) -> None:
        if len(meas_block) != BLOCK_LEN:
            raise ValueError("measurement block must have 16 values")
        self.values[MEAS_BASE:MEAS_BASE + BLOCK_LEN] = [float(v) for v in meas_block]

    def read(self, addr: int, count: int) -> list[float]:
        if count <= 0 or addr < 0 or addr + count > N_REGS:
            raise RegisterAccessError(f"read [{addr}, {addr + count}) out of range")
        return list(self.values[addr:addr + count])

    def read_block(self, base: int) -> list[float]:
        if base not in (MEAS_BASE, CMD_BASE):
            raise RegisterAccessError(f"no register block at addr {base}")
        return list(self.values[base:base + BLOCK_LEN])

    def write(self, addr: int, values: list[float]) -> None:
        if addr < CMD_BASE:
            raise RegisterAccessError(f"write to measurement register {addr} rejected")
        if addr + len(values) > N_REGS:
            raise RegisterAccessError(f"write [{addr}, {addr + len(values)}) out of range")
        if not values:
            raise RegisterAccessError("empty write")
        for i, v in enumerate(values):
            self.values[addr + i] = float(v)


@dataclass
class Measurements:
    """Measurement vector as seen by a controller, in register order."""

    f_hz: float = 0.0
    v_pu: float = 0.0
    p_load_kw: float = 0.0
    p_pv_kw: float = 0.0
    p_diesel_kw: float = 0.0
    p_batt1_kw: float = 0.0
    p_batt2_kw: float = 0.0
    soc1: float = 0.0
    soc2: float = 0.0
    breaker_main: float = 0.0
    df_hz: float = 0.0
    dv_pu: float = 0.0
    dtheta_rad: float = 0.0
    diesel_ratio: float = 0.0

    def to_block(self) -> list[float]:
        return [getattr(self, f.name) for f in fields(self)] + [0.0, 0.0]

    @classmethod
    def from_block(cls, block: list[float]) -> "Measurements":
        names = [f.name for f in fields(cls)]
        return cls(**{n: float(block[i]) for i, n in enumerate(names)})


@dataclass
class Commands:
    """Sparse command set. None means register untouched this cycle."""

    bank_mask: int | None = None
    pv_curtail_kw: float | None = None
    batt2_setpoint_kw: float | None = None
    breaker_cmd: int | None = None
    protection_group: int | None = None
    blackstart_ack: int | None = None
    freq_trim_hz: float | None = None
    events: list[str] = field(default_factory=list)

    _ADDRS = (
        ("bank_mask", REG_BANK_MASK),
        ("pv_curtail_kw", REG_PV_CURTAIL_KW),
        ("batt2_setpoint_kw", REG_BATT2_SETPOINT_KW),
        ("breaker_cmd", REG_BREAKER_CMD),
        ("protection_group", REG_PROTECTION_GROUP),
        ("blackstart_ack", REG_BLACKSTART_ACK),
        ("freq_trim_hz", REG_FREQ_TRIM_HZ),
    )

    def register_writes(self) -> list[tuple[int, float]]:
        out = []
        for name, addr in self._ADDRS:
            v = getattr(self, name)
            if v is not None:
                out.append((addr, float(v)))
        return out

    def is_empty(self) -> bool:
        return not self.register_writes()

    @classmethod
    def from_register_writes(cls, writes: list[tuple[int, float]]) -> "Commands":
        cmd = cls()
        by_addr = {addr: name for name, addr in cls._ADDRS}
        for addr, value in writes:
            name = by_addr.get(addr)
            if name is None:
                continue  # reserved register, stored but meaningless
            if name in ("bank_mask", "breaker_cmd", "protection_group", "blackstart_ack"):
                setattr(cmd, name, int(round(value)))
            else:
                setattr(cmd, name, float(value))
        return cmd
