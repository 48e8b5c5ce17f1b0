import math
from fractions import Fraction

import pytest

from greenfps.pareto import RdePoint
from greenfps.store import MeasurementStore, StoreError


def pt(seq="a", f=120, crf=18, q=40.0) -> RdePoint:
    return RdePoint(seq, Fraction(f), crf, q, 500.0, 12.0, 6.0)


def test_round_trip(tmp_path):
    path = tmp_path / "store.csv"
    store = MeasurementStore(path)
    store.append([pt(), pt(crf=21), pt(seq="b", f=Fraction(120000, 1001))])
    again = MeasurementStore(path)
    assert len(again) == 3
    assert again.sequences() == ["a", "b"]
    ntsc = again.for_sequence("b")[0]
    assert ntsc.frame_rate == Fraction(120000, 1001)


def test_duplicate_key_rejected(tmp_path):
    store = MeasurementStore(tmp_path / "store.csv")
    store.append([pt()])
    with pytest.raises(StoreError, match="duplicate"):
        store.append([pt()])


def test_contains_uses_key(tmp_path):
    store = MeasurementStore(tmp_path / "store.csv")
    store.append([pt()])
    assert ("a", Fraction(120), 18) in store
    assert ("a", Fraction(60), 18) not in store


def test_infinite_quality_round_trips(tmp_path):
    path = tmp_path / "store.csv"
    MeasurementStore(path).append([pt(q=math.inf)])
    point = MeasurementStore(path).points()[0]
    assert math.isinf(point.mpsnr_db)


def test_float_precision_round_trips(tmp_path):
    path = tmp_path / "store.csv"
    value = 41.123456789012345
    MeasurementStore(path).append([pt(q=value)])
    assert MeasurementStore(path).points()[0].mpsnr_db == value


def test_metadata_config_mismatch(tmp_path):
    store = MeasurementStore(tmp_path / "store.csv")
    store.write_metadata("mock", "aaaa")
    with pytest.raises(StoreError, match="config"):
        store.write_metadata("mock", "bbbb")


def test_unexpected_columns_rejected(tmp_path):
    path = tmp_path / "store.csv"
    path.write_text("sequence,who,knows\n")
    with pytest.raises(StoreError, match="columns"):
        MeasurementStore(path)
