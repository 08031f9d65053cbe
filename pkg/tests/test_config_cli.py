import csv
import math

import pytest

from grazingmodes import ConfigError
from grazingmodes.cli import main
from grazingmodes.config import RunConfig, parse_config_text, parse_float_list


def _read(path):
    return list(csv.reader(path.open()))


def test_parse_config_text():
    cfg = parse_config_text("# header\nN = 4\nkind=vhs  # trailing\n\nt-end = 2\n")
    assert cfg == {"N": "4", "kind": "vhs", "t_end": "2"}
    with pytest.raises(ConfigError):
        parse_config_text("just words")


def test_epsilon_list_validation():
    assert parse_float_list("0.2, 0.1;0.05") == [0.2, 0.1, 0.05]
    with pytest.raises(ConfigError):
        RunConfig("grazing-study", {"eps": "0.1,0.2"})
    with pytest.raises(ConfigError):
        RunConfig("grazing-study", {"eps": "0.1,0.1"})
    with pytest.raises(ConfigError):
        RunConfig("grazing-study", {"eps": "2.0"})
    with pytest.raises(ConfigError):
        RunConfig("nonsense")


def test_digest_ignores_output_location(tmp_path):
    a = RunConfig("modes", {"N": "2"}, out=tmp_path / "a")
    b = RunConfig("modes", {"N": "2"}, out=tmp_path / "b")
    assert a.digest() == b.digest()
    assert a.digest() != RunConfig("modes", {"N": "2"}, seed=1).digest()


def test_config_file_and_overrides(tmp_path):
    conf = tmp_path / "run.cfg"
    conf.write_text("kind = cutoff\nN = 3\n")
    assert main(["modes", "--config", str(conf), "--n", "1", "--out", str(tmp_path / "o")]) == 0
    rows = _read(tmp_path / "o" / "modes.csv")
    assert rows[0][0] == "# grazingmodes"
    assert rows[1] == ["kplus2", "kminus2", "dot", "value"]
    assert len(rows) - 2 == 24


def test_single_epsilon_gives_nan_slopes(tmp_path):
    out = tmp_path / "g"
    with pytest.warns(UserWarning):
        code = main(["grazing-study", "--n", "1", "--eps", "0.1", "--set", "random_pairs=3", "--out", str(out)])
    assert code == 0
    slopes = _read(out / "grazing_slopes.csv")[2:]
    assert all(math.isnan(float(r[1])) for r in slopes)


def test_domain_error_exit_code(tmp_path, capsys):
    assert main(["modes", "--n", "1", "--set", "kind=bogus", "--out", str(tmp_path)]) == 2
    assert "DomainError" in capsys.readouterr().err


def test_validate_passes(tmp_path, capsys):
    assert main(["validate", "--n", "1", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") == 8


def test_validate_skips_nonintegrable_kernel(tmp_path, capsys):
    code = main(["validate", "--n", "1", "--set", "kind=cutoff", "--set", "gamma=-3", "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == 0
    assert "SKIP" in out and "NON_INTEGRABLE" in out


def test_validate_flags_a_corrupted_cache(tmp_path, capsys):
    cache = tmp_path / "cache"
    assert main(["fpl-modes", "--n", "1", "--cache", str(cache), "--out", str(tmp_path / "f")]) == 0
    files = sorted(cache.glob("*.gzm"))
    assert files
    data = bytearray(files[0].read_bytes())
    data[-1] ^= 0x55
    files[0].write_bytes(bytes(data))
    capsys.readouterr()
    code = main(["validate", "--n", "1", "--cache", str(cache), "--out", str(tmp_path / "v")])
    rows = {r[0]: r[1] for r in _read(tmp_path / "v" / "validate.csv")[2:]}
    assert code == 1
    assert rows["cache.integrity"] == "FAIL"
    assert sum(1 for s in rows.values() if s == "PASS") == 7


@pytest.mark.parametrize(
    "args,files",
    [
        (["modes", "--n", "1"], ["modes.csv"]),
        (["fpl-modes", "--n", "2"], ["split_fields.csv"]),
        (["grazing-study", "--n", "1", "--eps", "0.2,0.1", "--set", "random_pairs=4"], ["grazing_study.csv", "grazing_pairs.csv"]),
        (["relax", "--n", "2", "--set", "t_end=0.2", "--set", "output_every=0.1"], ["relax.csv", "relax_final_fast.csv"]),
    ],
)
def test_reruns_are_byte_identical(tmp_path, args, files):
    for run in ("a", "b"):
        # grazing-study exits 1 when the remainder slope misses its band
        assert main(args + ["--seed", "3", "--out", str(tmp_path / run)]) in (0, 1)
    for name in files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
