import enum


class PotentialKind(str, enum.Enum):
    EXP = "exp"
    POWER = "power"
