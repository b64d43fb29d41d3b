import argparse
import math

SCHEDULES = ("factorial", "harmonic", "sqrt", "constant")
STEP_RULES = SCHEDULES + ("polyak",)


def step_size(alpha0: float, t: int, rule: str = "factorial") -> float:
    """ Step size of iteration t (t >= 1).

        factorial -- alpha_t = alpha_(t-1) / t with alpha_1 = alpha0
        harmonic -- alpha0 / t
        sqrt -- alpha0 / sqrt(t)
        constant -- alpha0

        The polyak rule has no schedule: its steps come from the dual bounds of each round.
    """
    if t < 1:
        raise ValueError(f"iteration index must be >= 1, got {t}")
    if rule == "factorial":
        return alpha0 / math.factorial(t)
    if rule == "harmonic":
        return alpha0 / t
    if rule == "sqrt":
        return alpha0 / math.sqrt(t)
    if rule == "constant":
        return alpha0
    raise ValueError(f"{rule!r} is not a step schedule, expected one of {SCHEDULES}")


def coerce_option(raw, default):
    """ Option value typed like its default. Values set through the environment or the
        magic's `set` command arrive as strings.
    """
    if not isinstance(raw, str) or isinstance(default, str):
        return raw
    if isinstance(default, bool):
        return raw.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    if default is None:
        return raw if raw.strip().lower() not in ("", "none") else None
    return raw


def positive_int(value):
    try:
        number = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"Not an integer: {value}")
    if number < 1:
        raise argparse.ArgumentTypeError(f"Must be >= 1: {value}")
    return number


def positive_float(value):
    try:
        number = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"Not a number: {value}")
    if not number > 0:
        raise argparse.ArgumentTypeError(f"Must be > 0: {value}")
    return number


def valid_sizes(value):
    """'10,20,40' -> [10, 20, 40]"""
    try:
        sizes = [int(part) for part in value.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"Not a comma separated list of sizes: {value}")
    if any(n < 2 for n in sizes):
        raise argparse.ArgumentTypeError(f"Every size must be >= 2: {value}")
    return sizes


def valid_delay(value):
    """'CLIQUE:K' with a 1-based clique id -> (0-based clique, K)"""
    try:
        clique, rounds = (int(part) for part in value.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"Not a CLIQUE:K delay: {value}")
    if clique < 1 or rounds < 0:
        raise argparse.ArgumentTypeError(f"Clique ids start at 1 and delays are >= 0: {value}")
    return clique - 1, rounds
