import json
import math
from decimal import Decimal

import pytest

import kneadlab


def test_cubic_at_zero():
    m = kneadlab.Map("cubic", "0")
    value, err = m.deriv("0")
    assert abs(float(value) - 9) <= float(err) + 1e-60
    assert m.itinerary("0.5", 6) == "222222"
    assert m.kneading(8) == "11111111"
    x, _ = m.realize_point("12A")
    assert 0 < float(x) < 0.25


def test_pullback_rate():
    m = kneadlab.Map("cubic", "0")
    r = m.pullback("0", delta="0.001", depth=60)
    assert len(r["diam"]) == 61
    assert r["branches"] == "1" * 60
    assert r["rho"] == pytest.approx(math.log(9), rel=1e-3)


def test_find_param():
    p = kneadlab.find_param("cubic", "1A")
    g, err = p["gamma"]
    assert 0 < float(g) < 1
    assert float(err) < 1e-30
    assert Decimal(p["lo"]) < Decimal(g) < Decimal(p["hi"])


def test_construct_and_verify():
    text = kneadlab.construct("single", "", samples=3)
    state = json.loads(text)
    assert state["version"] == kneadlab.STATE_VERSION
    assert state["t"] == [6]
    reports = kneadlab.verify(text, samples=3)
    assert {r["name"] for r in reports} >= {"ce_windows", "recurrence"}
    assert next(r for r in reports if r["name"] == "ce_windows")["pass"]


def test_errors():
    with pytest.raises(kneadlab.InvalidArgument):
        kneadlab.Map("quartic", "0")
    with pytest.raises(kneadlab.ParamOutOfRange):
        kneadlab.Map("cubic", "1")
    with pytest.raises(kneadlab.SchemaVersionMismatch):
        kneadlab.verify(json.dumps({"version": 999}))
    with pytest.raises(kneadlab.Error):
        kneadlab.Map("cubic", "0").realize_point("1Q")
