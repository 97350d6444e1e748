"""CS1 problem templates: reference behaviour, input generators and source variants.

Sources are `string.Template`s. `$role` placeholders receive randomized identifiers, other
placeholders receive small statement-preserving style choices (`x++` vs `x += 1`, `b` vs
`b == true`, `x <= 60` vs `x < 61`, ...).
"""

from __future__ import annotations

import textwrap
from dataclasses import dataclass, field
from string import Template
from typing import Callable

import numpy as np

NAME_POOLS = {
    "index": ["i", "j", "k", "idx", "index", "pos", "n"],
    "sum": ["sum", "total", "result", "acc", "tally", "s"],
    "count": ["count", "cnt", "counter", "num", "occurrences", "matches"],
    "array": ["nums", "arr", "a", "array", "values", "data"],
    "string": ["str", "s", "word", "text", "input", "line"],
    "int": ["x", "n", "value", "num", "val", "number"],
    "flag": ["flag", "skip", "found", "done", "seen", "ok"],
    "speed": ["speed", "spd", "mph", "currentSpeed", "velocity"],
    "bday": ["isBirthday", "birthday", "bday", "isBday", "birthdayToday"],
    "tmp": ["temp", "tmp", "limit", "bonus", "extra", "adj"],
    "res": ["result", "res", "ticket", "answer", "out", "ret"],
    "lo": ["lo", "low", "min", "start", "a"],
    "hi": ["hi", "high", "max", "end", "b"],
    "mode": ["outsideMode", "outside", "mode", "isOutside", "flip"],
    "earned": ["earned", "points", "score", "got", "correct"],
    "possible": ["possible", "maxPoints", "total", "outOf", "max"],
    "pct": ["pct", "percent", "p", "ratio", "grade"],
}


@dataclass
class Problem:
    id: str
    method: str
    reference: Callable[..., object]
    gen_input: Callable[[np.random.Generator], list]
    variants: list[str]
    roles: dict[str, str]
    slots: Callable[[dict, np.random.Generator], dict] = lambda names, rng: {}
    edge_inputs: list[list] = field(default_factory=list)

    def render(self, variant: int, names: dict, rng: np.random.Generator) -> str:
        values = dict(names)
        values.update(self.slots(names, rng))
        source = textwrap.dedent(self.variants[variant]).strip() + "\n"
        return Template(source).substitute(values)

    def reference_inputs(self, n_random: int = 40, seed: int = 12345) -> list[list]:
        rng = np.random.default_rng([seed, len(self.id)] + [ord(ch) for ch in self.id])
        return [list(x) for x in self.edge_inputs] + [self.gen_input(rng) for _ in range(n_random)]


def pick_names(roles: dict[str, str], rng: np.random.Generator) -> dict[str, str]:
    """Distinct identifiers per role (roles map placeholder -> pool name)."""
    used: set[str] = set()
    names = {}
    for placeholder in sorted(roles):
        pool = [n for n in NAME_POOLS[roles[placeholder]] if n not in used]
        choice = pool[int(rng.integers(len(pool)))]
        used.add(choice)
        names[placeholder] = choice
    return names


def _choice(rng, options):
    return options[int(rng.integers(len(options)))]


def inc(var, rng):
    return _choice(rng, [f"{var}++", f"{var}++", f"{var} += 1", f"{var} = {var} + 1"])


def add(acc, expr, rng):
    return _choice(rng, [f"{acc} += {expr}", f"{acc} = {acc} + {expr}"])


def is_true(var, rng):
    return f"{var} == true" if rng.random() < 0.6 else var


def at_most(x, c, rng):
    return f"{x} <= {c}" if rng.random() < 0.7 else f"{x} < {c + 1}"


def _int_array(rng, values, max_len=8, p=None):
    n = int(rng.integers(0, max_len + 1))
    return [[int(v) for v in rng.choice(values, size=n, p=p)]]


# reference implementations -------------------------------------------------------

def ref_caught_speeding(speed, bday):
    bonus = 5 if bday else 0
    if speed <= 60 + bonus:
        return 0
    if speed <= 80 + bonus:
        return 1
    return 2


def ref_red_ticket(a, b, c):
    if a == b == c == 2:
        return 10
    if a == b == c:
        return 5
    if b != a and c != a:
        return 1
    return 0


def ref_count_code(s):
    return sum(1 for i in range(len(s) - 3) if s[i] == "c" and s[i + 1] == "o" and s[i + 3] == "e")


def ref_sum13(nums):
    return sum(v for i, v in enumerate(nums) if v != 13 and (i == 0 or nums[i - 1] != 13))


def ref_can_balance(nums):
    return any(sum(nums[:k]) == sum(nums[k:]) for k in range(1, len(nums)))


def ref_count_evens(nums):
    return sum(1 for v in nums if v % 2 == 0)


def _java_div(a, b):
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def ref_score_percent(earned, possible):
    return 0 if possible == 0 else _java_div(earned * 100, possible)


def ref_is_passing(earned, possible):
    return possible != 0 and _java_div(earned * 100, possible) >= 60


def ref_in1to10(n, outside):
    return (n <= 1 or n >= 10) if outside else (1 <= n <= 10)


def ref_sum_digits(n):
    total = 0
    while n > 0:
        total += n % 10
        n //= 10
    return total


def ref_mid_distance(lo, hi, x):
    return abs(x - _java_div(lo + hi, 2))


def ref_count_hi(s):
    return sum(1 for i in range(len(s) - 1) if s[i:i + 2] == "hi")


def ref_first_last6(nums):
    return len(nums) > 0 and (nums[0] == 6 or nums[-1] == 6)


# problems -------------------------------------------------------------------------

def _speeding_slots(names, rng):
    s = names["speed"]
    return {"le60": at_most(s, 60, rng), "le80": at_most(s, 80, rng), "bday_test": is_true(names["bday"], rng)}


def _letters(rng, alphabet, max_len):
    n = int(rng.integers(0, max_len + 1))
    return "".join(alphabet[int(i)] for i in rng.integers(0, len(alphabet), size=n))


PROBLEMS: list[Problem] = [
    Problem(
        id="caughtSpeeding",
        method="caughtSpeeding",
        reference=ref_caught_speeding,
        gen_input=lambda rng: [int(rng.integers(40, 101)), bool(rng.random() < 0.5)],
        roles={"speed": "speed", "bday": "bday", "tmp": "tmp", "res": "res"},
        slots=_speeding_slots,
        edge_inputs=[[60, False], [61, False], [65, True], [66, True], [80, False], [81, False], [85, True], [86, True]],
        variants=[
            """
            int caughtSpeeding(int $speed, boolean $bday) {
                int $tmp = 0;
                if ($bday_test) {
                    $tmp = 5;
                }
                if ($speed <= 60 + $tmp) {
                    return 0;
                } else if ($speed <= 80 + $tmp) {
                    return 1;
                } else {
                    return 2;
                }
            }
            """,
            """
            int caughtSpeeding(int $speed, boolean $bday) {
                if ($bday_test) {
                    $speed = $speed - 5;
                }
                int $res = 2;
                if ($le80) {
                    $res = 1;
                }
                if ($le60) {
                    $res = 0;
                }
                return $res;
            }
            """,
            """
            int caughtSpeeding(int $speed, boolean $bday) {
                int $tmp = 60;
                if ($bday_test) {
                    $tmp = 65;
                }
                if ($speed <= $tmp) {
                    return 0;
                }
                if ($speed > $tmp && $speed <= $tmp + 20) {
                    return 1;
                }
                return 2;
            }
            """,
        ],
    ),
    Problem(
        id="redTicket",
        method="redTicket",
        reference=ref_red_ticket,
        gen_input=lambda rng: [int(v) for v in rng.integers(0, 3, size=3)],
        roles={"a": "lo", "b": "hi", "c": "int", "res": "res"},
        edge_inputs=[[2, 2, 2], [1, 1, 1], [0, 0, 0], [2, 1, 0], [1, 2, 1], [1, 1, 2], [0, 1, 1]],
        variants=[
            """
            int redTicket(int $a, int $b, int $c) {
                if ($a == 2 && $b == 2 && $c == 2) {
                    return 10;
                }
                if ($a == $b && $b == $c) {
                    return 5;
                }
                if ($b != $a && $c != $a) {
                    return 1;
                }
                return 0;
            }
            """,
            """
            int redTicket(int $a, int $b, int $c) {
                int $res = 0;
                if ($a == 2 && $b == 2 && $c == 2) {
                    $res = 10;
                } else if ($a == $b && $b == $c) {
                    $res = 5;
                } else if ($b != $a && $c != $a) {
                    $res = 1;
                } else {
                    $res = 0;
                }
                return $res;
            }
            """,
        ],
    ),
    Problem(
        id="countCode",
        method="countCode",
        reference=ref_count_code,
        gen_input=lambda rng: [_letters(rng, "cooeexbz", 10)],
        roles={"s": "string", "i": "index", "count": "count"},
        slots=lambda n, rng: {"inc_i": inc(n["i"], rng), "inc_count": inc(n["count"], rng)},
        edge_inputs=[[""], ["cod"], ["code"], ["cozexxcope"], ["cozfcode"], ["xxcoze"]],
        variants=[
            """
            int countCode(String $s) {
                int $count = 0;
                for (int $i = 0; $i < $s.length() - 3; $inc_i) {
                    if ($s.charAt($i) == 'c' && $s.charAt($i + 1) == 'o' && $s.charAt($i + 3) == 'e') {
                        $inc_count;
                    }
                }
                return $count;
            }
            """,
            """
            int countCode(String $s) {
                int $count = 0;
                for (int $i = 0; $i < $s.length(); $inc_i) {
                    if ($i + 3 < $s.length() && $s.charAt($i) == 'c' && $s.charAt($i + 1) == 'o' && $s.charAt($i + 3) == 'e') {
                        $inc_count;
                    }
                }
                return $count;
            }
            """,
        ],
    ),
    Problem(
        id="sum13",
        method="sum13",
        reference=ref_sum13,
        gen_input=lambda rng: _int_array(rng, [1, 2, 5, 13], p=[0.25, 0.25, 0.2, 0.3]),
        roles={"nums": "array", "i": "index", "sum": "sum", "flag": "flag"},
        slots=lambda n, rng: {
            "inc_i": inc(n["i"], rng),
            "add_sum": add(n["sum"], f"{n['nums']}[{n['i']}]", rng),
            "flag_test": is_true(n["flag"], rng),
        },
        edge_inputs=[[[]], [[13]], [[13, 13, 5]], [[1, 13, 2, 5]], [[5, 13]], [[13, 1, 1]]],
        variants=[
            """
            int sum13(int[] $nums) {
                int $sum = 0;
                boolean $flag = false;
                for (int $i = 0; $i < $nums.length; $inc_i) {
                    if ($nums[$i] == 13) {
                        $flag = true;
                    } else if ($flag_test) {
                        $flag = false;
                    } else {
                        $add_sum;
                    }
                }
                return $sum;
            }
            """,
            """
            int sum13(int[] $nums) {
                int $sum = 0;
                for (int $i = 0; $i < $nums.length; $inc_i) {
                    if ($nums[$i] != 13 && ($i == 0 || $nums[$i - 1] != 13)) {
                        $add_sum;
                    }
                }
                return $sum;
            }
            """,
        ],
    ),
    Problem(
        id="canBalance",
        method="canBalance",
        reference=ref_can_balance,
        gen_input=lambda rng: _int_array(rng, [1, 2, 3, 4], max_len=6),
        roles={"nums": "array", "i": "index", "sum": "sum", "left": "count"},
        slots=lambda n, rng: {
            "inc_i": inc(n["i"], rng),
            "add_sum": add(n["sum"], f"{n['nums']}[{n['i']}]", rng),
            "add_left": add(n["left"], f"{n['nums']}[{n['i']}]", rng),
        },
        edge_inputs=[[[]], [[1]], [[1, 1]], [[2, 1, 1]], [[1, 1, 2]], [[1, 2, 3]], [[3, 1, 2]], [[2, 2]]],
        variants=[
            """
            boolean canBalance(int[] $nums) {
                int $sum = 0;
                for (int $i = 0; $i < $nums.length; $inc_i) {
                    $add_sum;
                }
                int $left = 0;
                for (int $i = 0; $i < $nums.length - 1; $inc_i) {
                    $add_left;
                    if ($left * 2 == $sum) {
                        return true;
                    }
                }
                return false;
            }
            """,
            """
            boolean canBalance(int[] $nums) {
                int $sum = 0;
                for (int $i = 0; $i < $nums.length; $inc_i) {
                    $add_sum;
                }
                int $left = 0;
                for (int $i = 0; $i < $nums.length - 1; $inc_i) {
                    $add_left;
                    if ($left == $sum - $left) {
                        return true;
                    }
                }
                return false;
            }
            """,
        ],
    ),
    Problem(
        id="countEvens",
        method="countEvens",
        reference=ref_count_evens,
        gen_input=lambda rng: _int_array(rng, [1, 2, 3, 4, 5, 6, 7, 10, 15]),
        roles={"nums": "array", "i": "index", "count": "count"},
        slots=lambda n, rng: {"inc_i": inc(n["i"], rng), "inc_count": inc(n["count"], rng)},
        edge_inputs=[[[]], [[2]], [[1]], [[2, 4, 6]], [[1, 3, 4]], [[10, 15, 2]]],
        variants=[
            """
            int countEvens(int[] $nums) {
                int $count = 0;
                for (int $i = 0; $i < $nums.length; $inc_i) {
                    if ($nums[$i] % 2 == 0) {
                        $inc_count;
                    }
                }
                return $count;
            }
            """,
            """
            int countEvens(int[] $nums) {
                int $count = 0;
                int $i = 0;
                while ($i < $nums.length) {
                    if ($nums[$i] % 2 == 0) {
                        $inc_count;
                    }
                    $inc_i;
                }
                return $count;
            }
            """,
        ],
    ),
    Problem(
        id="scorePercent",
        method="scorePercent",
        reference=ref_score_percent,
        gen_input=lambda rng: (lambda p: [int(rng.integers(0, p + 1)), p])(int(rng.integers(0, 21))),
        roles={"earned": "earned", "possible": "possible", "pct": "pct"},
        edge_inputs=[[0, 0], [1, 3], [2, 3], [5, 10], [7, 7], [3, 8]],
        variants=[
            """
            int scorePercent(int $earned, int $possible) {
                if ($possible == 0) {
                    return 0;
                }
                int $pct = $earned * 100 / $possible;
                return $pct;
            }
            """,
            """
            int scorePercent(int $earned, int $possible) {
                int $pct = 0;
                if ($possible != 0) {
                    $pct = $earned * 100 / $possible;
                }
                return $pct;
            }
            """,
        ],
    ),
    Problem(
        id="isPassing",
        method="isPassing",
        reference=ref_is_passing,
        gen_input=lambda rng: (lambda p: [int(rng.integers(0, p + 1)), p])(int(rng.integers(0, 21))),
        roles={"earned": "earned", "possible": "possible", "flag": "flag"},
        edge_inputs=[[0, 0], [3, 5], [2, 5], [6, 10], [5, 10], [1, 1]],
        variants=[
            """
            boolean isPassing(int $earned, int $possible) {
                boolean $flag = $possible != 0 && $earned * 100 / $possible >= 60;
                return $flag;
            }
            """,
            """
            boolean isPassing(int $earned, int $possible) {
                if ($possible > 0 && $earned * 100 / $possible >= 60) {
                    return true;
                }
                return false;
            }
            """,
        ],
    ),
    Problem(
        id="in1To10",
        method="in1To10",
        reference=ref_in1to10,
        gen_input=lambda rng: [int(rng.integers(-3, 15)), bool(rng.random() < 0.5)],
        roles={"n": "int", "mode": "mode"},
        slots=lambda n, rng: {
            "mode_test": f"{n['mode']} == true",
            "le10": at_most(n["n"], 10, rng),
            "le1": at_most(n["n"], 1, rng),
        },
        edge_inputs=[[1, False], [10, False], [0, False], [11, False], [1, True], [10, True], [2, True], [9, True]],
        variants=[
            """
            boolean in1To10(int $n, boolean $mode) {
                if ($mode_test) {
                    return $le1 || $n >= 10;
                } else {
                    return $n >= 1 && $le10;
                }
            }
            """,
            """
            boolean in1To10(int $n, boolean $mode) {
                if ($mode_test) {
                    if ($le1 || $n >= 10) {
                        return true;
                    }
                    return false;
                }
                if ($n >= 1 && $le10) {
                    return true;
                }
                return false;
            }
            """,
        ],
    ),
    Problem(
        id="sumDigits",
        method="sumDigits",
        reference=ref_sum_digits,
        gen_input=lambda rng: [int(rng.integers(0, 10000))],
        roles={"n": "int", "sum": "sum"},
        slots=lambda n, rng: {"add_sum": add(n["sum"], f"{n['n']} % 10", rng)},
        edge_inputs=[[0], [7], [10], [99], [1234], [5005]],
        variants=[
            """
            int sumDigits(int $n) {
                int $sum = 0;
                while ($n > 0) {
                    $add_sum;
                    $n = $n / 10;
                }
                return $sum;
            }
            """,
        ],
    ),
    Problem(
        id="midDistance",
        method="midDistance",
        reference=ref_mid_distance,
        gen_input=lambda rng: [int(rng.integers(0, 20)), int(rng.integers(20, 40)), int(rng.integers(0, 40))],
        roles={"lo": "lo", "hi": "hi", "x": "int", "tmp": "tmp", "res": "res"},
        edge_inputs=[[0, 20, 10], [0, 21, 10], [3, 20, 0], [10, 30, 35], [1, 2, 1]],
        variants=[
            """
            int midDistance(int $lo, int $hi, int $x) {
                int $tmp = ($lo + $hi) / 2;
                int $res = $x - $tmp;
                if ($res < 0) {
                    $res = -$res;
                }
                return $res;
            }
            """,
            """
            int midDistance(int $lo, int $hi, int $x) {
                int $tmp = ($lo + $hi) / 2;
                return Math.abs($x - $tmp);
            }
            """,
        ],
    ),
    Problem(
        id="countHi",
        method="countHi",
        reference=ref_count_hi,
        gen_input=lambda rng: [_letters(rng, "hiixh", 9)],
        roles={"s": "string", "i": "index", "count": "count"},
        slots=lambda n, rng: {"inc_i": inc(n["i"], rng), "inc_count": inc(n["count"], rng)},
        edge_inputs=[[""], ["h"], ["hi"], ["hihi"], ["xhix"], ["ih"]],
        variants=[
            """
            int countHi(String $s) {
                int $count = 0;
                for (int $i = 0; $i < $s.length() - 1; $inc_i) {
                    if ($s.substring($i, $i + 2).equals("hi")) {
                        $inc_count;
                    }
                }
                return $count;
            }
            """,
            """
            int countHi(String $s) {
                int $count = 0;
                for (int $i = 0; $i < $s.length(); $inc_i) {
                    if ($i + 1 < $s.length() && $s.charAt($i) == 'h' && $s.charAt($i + 1) == 'i') {
                        $inc_count;
                    }
                }
                return $count;
            }
            """,
        ],
    ),
    Problem(
        id="firstLast6",
        method="firstLast6",
        reference=ref_first_last6,
        gen_input=lambda rng: _int_array(rng, [1, 2, 6, 9], max_len=5),
        roles={"nums": "array"},
        edge_inputs=[[[]], [[6]], [[1]], [[6, 1]], [[1, 6]], [[1, 2, 3]]],
        variants=[
            """
            boolean firstLast6(int[] $nums) {
                return $nums.length > 0 && ($nums[0] == 6 || $nums[$nums.length - 1] == 6);
            }
            """,
            """
            boolean firstLast6(int[] $nums) {
                if ($nums.length > 0 && $nums[0] == 6) {
                    return true;
                }
                if ($nums.length > 0 && $nums[$nums.length - 1] == 6) {
                    return true;
                }
                return false;
            }
            """,
        ],
    ),
]

PROBLEMS_BY_ID = {p.id: p for p in PROBLEMS}
