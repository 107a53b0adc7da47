import numpy as np
import pytest

from tdsmor import gen_random_stable, load, save
from tdsmor.bt import reduce_combbt
from tdsmor.errors import FileFormatError


@pytest.fixture(params=["sys.tds", "sys.json"])
def path(request, tmp_path):
    return tmp_path / request.param


def _same(a, b):
    return a.shape == b.shape and np.array_equal(a.view(np.uint64), b.view(np.uint64))


def test_round_trip_bit_exact(path):
    system, init = gen_random_stable(7, (1, 3), seed=4, m=2, p=2)
    save(path, system, init, meta={"note": "x", "seed": np.int64(4)})
    s2, i2, red, meta = load(path)
    assert red is None
    assert meta == {"note": "x", "seed": 4}
    assert _same(s2.A0, system.A0)
    for (a, d), (b, e) in zip(system.delayed, s2.delayed):
        assert d == e and _same(a, b)
    assert _same(s2.B, system.B) and _same(s2.C, system.C)
    assert _same(i2.values, init.values)
    for k in range(init.d_max + 1):
        assert _same(i2.bases[k], init.bases[k])


def test_round_trip_reduced(path):
    system, init = gen_random_stable(8, (2,), seed=1)
    red = reduce_combbt(system, init, 3)
    save(path, red.system, red.init, reduced=red)
    s2, i2, r2, _ = load(path)
    assert r2.method == "combbt"
    assert _same(r2.V, red.V) and _same(r2.W, red.W)
    assert _same(s2.A0, red.system.A0)
    assert r2.params["singular_values"] == red.params["singular_values"]


def test_empty_history_bases(path):
    system, init = gen_random_stable(4, (2,), seed=0)
    zero = type(init).zeros(4, 2)
    save(path, system, zero)
    _, i2, _, _ = load(path)
    assert i2.basis(-1).shape == (4, 0)
    assert i2.is_zero()


def test_no_temporary_files_left(tmp_path):
    system, init = gen_random_stable(3, (1,), seed=0)
    save(tmp_path / "a.tds", system, init)
    assert [p.name for p in tmp_path.iterdir()] == ["a.tds"]


@pytest.mark.parametrize("damage", ["magic", "truncate", "trailing", "header"])
def test_corrupt_binary(tmp_path, damage):
    system, init = gen_random_stable(5, (1,), seed=0)
    p = tmp_path / "s.tds"
    save(p, system, init)
    data = bytearray(p.read_bytes())
    if damage == "magic":
        data[0:6] = b"XXXXXX"
    elif damage == "truncate":
        data = data[:-20]
    elif damage == "trailing":
        data += b"\x00" * 8
    else:
        data[14] = 0xFF
    p.write_bytes(bytes(data))
    with pytest.raises(FileFormatError):
        load(p)


def test_corrupt_json(tmp_path):
    p = tmp_path / "s.json"
    p.write_text('{"format_version": 1}')
    with pytest.raises(FileFormatError):
        load(p)
    p.write_text("not json")
    with pytest.raises(FileFormatError):
        load(p)


def test_missing_file(tmp_path):
    with pytest.raises(OSError):
        load(tmp_path / "absent.tds")
