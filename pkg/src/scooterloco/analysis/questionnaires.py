"""Scoring for the post-condition questionnaires.

Responses are item vectors in administration order (item 1 first). Every
scorer validates arity and range and names the offending item on failure.
"""
import enum
import math

import numpy as np

TLX_SUBSCALES = ("mental", "physical", "temporal", "performance", "effort", "frustration")
TLX_DEFAULT_RANGE = (1, 7)

# 1-based item membership of the SSQ subscales; some items load on two.
SSQ_NAUSEA = (1, 6, 7, 8, 9, 15, 16)
SSQ_OCULOMOTOR = (1, 2, 3, 4, 5, 9, 11)
SSQ_DISORIENTATION = (5, 8, 10, 11, 12, 13, 14)
SSQ_WEIGHTS = {"nausea": 9.54, "oculomotor": 7.58, "disorientation": 13.92, "total": 3.74}

IPQ_ITEMS = ("G1", "SP1", "SP2", "SP3", "SP4", "SP5", "INV1", "INV2", "INV3", "INV4",
             "REAL1", "REAL2", "REAL3", "REAL4")
IPQ_REVERSED = ("SP2", "INV3", "REAL1")
IPQ_MAX = 6


class Kind(str, enum.Enum):
    SUS = "sus"
    SSQ = "ssq"
    TLX = "tlx"
    BORG = "borg"
    IPQ = "ipq"
    UEQ_S = "ueq_s"
    ENJOYMENT = "enjoyment"


class ResponseError(ValueError):
    def __init__(self, kind, message, item=None):
        self.kind = kind
        self.item = item
        where = f" item {item}" if item is not None else ""
        super().__init__(f"{kind}{where}: {message}")


def _check(kind, responses, n_items, lo, hi, integer=True):
    vals = list(responses)
    if len(vals) != n_items:
        raise ResponseError(kind, f"expected {n_items} items, got {len(vals)}")
    out = []
    for i, v in enumerate(vals, start=1):
        try:
            f = float(v)
        except (TypeError, ValueError):
            raise ResponseError(kind, f"not a number: {v!r}", i) from None
        if not math.isfinite(f) or f < lo or f > hi:
            raise ResponseError(kind, f"value {v!r} outside [{lo}, {hi}]", i)
        if integer and f != int(f):
            raise ResponseError(kind, f"value {v!r} is not an integer", i)
        out.append(f)
    return np.asarray(out)


def score_sus(responses):
    r = _check("sus", responses, 10, 1, 5)
    odd = r[0::2] - 1
    even = 5 - r[1::2]
    return {"sus": float((odd.sum() + even.sum()) * 2.5)}


def score_ssq(responses):
    r = _check("ssq", responses, 16, 0, 3)

    def raw(items):
        return float(sum(r[i - 1] for i in items))

    n, o, d = raw(SSQ_NAUSEA), raw(SSQ_OCULOMOTOR), raw(SSQ_DISORIENTATION)
    return {
        "nausea": n * SSQ_WEIGHTS["nausea"],
        "oculomotor": o * SSQ_WEIGHTS["oculomotor"],
        "disorientation": d * SSQ_WEIGHTS["disorientation"],
        "total": (n + o + d) * SSQ_WEIGHTS["total"],
    }


def score_tlx(responses, item_range=TLX_DEFAULT_RANGE):
    """Raw (unweighted) TLX. One value per subscale, or a list of values
    per subscale that gets averaged. Also returns the overall mean."""
    if isinstance(responses, dict):
        missing = [s for s in TLX_SUBSCALES if s not in responses]
        if missing:
            raise ResponseError("tlx", f"missing subscales {missing}")
        per = [responses[s] for s in TLX_SUBSCALES]
    else:
        per = list(responses)
        if len(per) != len(TLX_SUBSCALES):
            raise ResponseError("tlx", f"expected {len(TLX_SUBSCALES)} items, got {len(per)}")
    lo, hi = item_range
    out = {}
    for i, (name, v) in enumerate(zip(TLX_SUBSCALES, per), start=1):
        items = v if isinstance(v, (list, tuple, np.ndarray)) else [v]
        if len(items) == 0:
            raise ResponseError("tlx", "no ratings", i)
        vals = _check("tlx", items, len(items), lo, hi, integer=False)
        out[name] = float(vals.mean())
    out["raw_tlx"] = float(np.mean([out[s] for s in TLX_SUBSCALES]))
    out["item_range"] = [lo, hi]
    return out


def score_borg(responses):
    r = _check("borg", _as_list(responses), 1, 6, 20)
    return {"borg": float(r[0])}


def score_enjoyment(responses):
    r = _check("enjoyment", _as_list(responses), 1, 1, 7)
    return {"enjoyment": float(r[0])}


def score_ipq(responses):
    """IPQ on a 0..6 scale; reversed items are flipped before summing."""
    r = _check("ipq", responses, len(IPQ_ITEMS), 0, IPQ_MAX)
    scored = {name: (IPQ_MAX - v if name in IPQ_REVERSED else v) for name, v in zip(IPQ_ITEMS, r)}

    def sub(prefix):
        return float(sum(v for k, v in scored.items() if k.rstrip("0123456789") == prefix))

    return {"general": float(scored["G1"]), "spatial_presence": sub("SP"),
            "involvement": sub("INV"), "realism": sub("REAL")}


def score_ueq_s(responses):
    """UEQ-Short: 8 items already transformed to -3..+3."""
    r = _check("ueq_s", responses, 8, -3, 3)
    return {"pragmatic": float(r[:4].mean()), "hedonic": float(r[4:].mean()), "overall": float(r.mean())}


def _as_list(responses):
    if isinstance(responses, (list, tuple, np.ndarray)):
        return list(responses)
    return [responses]


_SCORERS = {
    Kind.SUS: score_sus,
    Kind.SSQ: score_ssq,
    Kind.TLX: score_tlx,
    Kind.BORG: score_borg,
    Kind.IPQ: score_ipq,
    Kind.UEQ_S: score_ueq_s,
    Kind.ENJOYMENT: score_enjoyment,
}


def score_questionnaire(kind, responses, **options):
    try:
        kind = Kind(kind)
    except ValueError:
        raise ResponseError(str(kind), "unknown questionnaire kind") from None
    return _SCORERS[kind](responses, **options)


def score_ranges(kind, item_range=TLX_DEFAULT_RANGE):
    """Attainable [lo, hi] for each score a kind produces."""
    kind = Kind(kind)
    if kind is Kind.SUS:
        return {"sus": (0.0, 100.0)}
    if kind is Kind.SSQ:
        return {
            "nausea": (0.0, 3 * len(SSQ_NAUSEA) * SSQ_WEIGHTS["nausea"]),
            "oculomotor": (0.0, 3 * len(SSQ_OCULOMOTOR) * SSQ_WEIGHTS["oculomotor"]),
            "disorientation": (0.0, 3 * len(SSQ_DISORIENTATION) * SSQ_WEIGHTS["disorientation"]),
            "total": (0.0, 3 * 21 * SSQ_WEIGHTS["total"]),
        }
    if kind is Kind.TLX:
        lo, hi = item_range
        return {s: (lo, hi) for s in TLX_SUBSCALES + ("raw_tlx",)}
    if kind is Kind.BORG:
        return {"borg": (6.0, 20.0)}
    if kind is Kind.IPQ:
        return {"general": (0.0, 6.0), "spatial_presence": (0.0, 30.0),
                "involvement": (0.0, 24.0), "realism": (0.0, 24.0)}
    if kind is Kind.UEQ_S:
        return {k: (-3.0, 3.0) for k in ("pragmatic", "hedonic", "overall")}
    return {"enjoyment": (1.0, 7.0)}
