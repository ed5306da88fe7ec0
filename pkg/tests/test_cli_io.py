import math

import numpy as np
import pytest

from qflow.cli import main
from qflow.config import ConfigError, build_initial_state, parse_config, taylor_green, uniaxial_wave
from qflow.qtensor import ModelParams, State
from qflow.snapshots import SnapshotError, emit_series, read_series, read_snapshot, write_snapshot
from qflow.spectral import Grid, random_velocity
from qflow.qtensor import random_qtensor

MINIMAL = """
[grid]
n = 32

[params]
a = -0.2
b = 0.8
c = 1.0
gamma = 0.8
nu = 0.25
L = 0.4
"""


def full_config(outdir, n=32, extra=""):
    return MINIMAL + f"""
[time]
dt = 0.005
t_end = 0.05

[init]
preset = random_spectrum
seed = 5
amplitude_u = 0.4
amplitude_q = 0.3
kmax = 6

[output]
dir = {outdir}
{extra}
"""


# -- config parsing ----------------------------------------------------------------


def test_minimal_config_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.time.cfl == 0.4
    assert cfg.time.scheme == "if-rk2"
    assert cfg.time.dt == "auto"
    assert cfg.length == pytest.approx(2 * math.pi)
    assert cfg.preset == "random_spectrum"
    assert cfg.params.n_cutoff is None


def test_config_rejects_nonpositive_c():
    text = MINIMAL.replace("c = 1.0", "c = -1.0")
    with pytest.raises(ConfigError, match="c must be positive"):
        parse_config(text)


def test_config_rejects_unknown_key():
    text = MINIMAL + "\n[params]\n" if False else MINIMAL.replace("L = 0.4", "L = 0.4\nxi = 0.1")
    with pytest.raises(ConfigError, match="xi"):
        parse_config(text)


def test_config_errors_carry_line_numbers():
    text = MINIMAL.replace("b = 0.8", "b == 0.8")
    with pytest.raises(ConfigError, match=r"line \d+"):
        parse_config(text)


def test_config_rejects_unknown_section():
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config(MINIMAL + "\n[physics]\nz = 1\n")


def test_config_rejects_duplicate_and_missing():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config(MINIMAL + "\n[params]\na = 1.0\n" if False
                     else MINIMAL.replace("a = -0.2", "a = -0.2\na = 0.3"))
    with pytest.raises(ConfigError, match="missing required key"):
        parse_config("[grid]\nn = 32\n")


def test_config_rejects_bad_grid():
    with pytest.raises(ConfigError, match="power of two"):
        parse_config(MINIMAL.replace("n = 32", "n = 33"))


def test_config_probe_parsing():
    cfg = parse_config(MINIMAL + "\n[output]\nprobes = hs:0.5, hs:1.0\n")
    assert cfg.hs_probes == (0.5, 1.0)
    with pytest.raises(ConfigError, match="unknown probe"):
        parse_config(MINIMAL + "\n[output]\nprobes = l33t\n")
    with pytest.raises(ConfigError, match="snapshot_stride"):
        parse_config(MINIMAL + "\n[output]\nsnapshot_stride = 0\n")


def test_check_exit_code_on_failure(monkeypatch):
    from qflow import checks

    monkeypatch.setattr(checks, "partition_unity_check",
                        lambda grid: checks.Report("partition_unity", False, 0.0))
    assert main(["check", "partition", "--n", "32"]) == 1


def test_fft_workers_env(monkeypatch):
    from qflow.spectral import fft_workers

    monkeypatch.setenv("QFLOW_THREADS", "2")
    assert fft_workers() == 2
    monkeypatch.setenv("QFLOW_THREADS", "0")
    with pytest.raises(ValueError):
        fft_workers()
    monkeypatch.setenv("QFLOW_THREADS", "many")
    with pytest.raises(ValueError):
        fft_workers()


def test_presets():
    g = Grid(32)
    u = taylor_green(g, 0.7)
    assert g.divergence_residual(g.fft(u)) <= 1e-12
    q = uniaxial_wave(g, 0.5)
    assert q.shape == (5, 32, 32) and np.abs(q[0]).max() == 0.0

    cfg = parse_config(MINIMAL + "\n[init]\npreset = taylor_green\n")
    st = build_initial_state(cfg, g)
    assert np.abs(st.q).max() == 0.0 and np.abs(st.u).max() > 0.0


# -- snapshots -----------------------------------------------------------------------


def random_state(n=32, seed=0):
    g = Grid(n)
    rng = np.random.default_rng(seed)
    return g, State(0.4 * random_velocity(g, rng), 0.3 * random_qtensor(g, rng), t=0.25)


def test_snapshot_roundtrip_byte_exact(tmp_path):
    g, st = random_state()
    p = ModelParams(a=-0.2, b=0.8, c=1.0, gamma=0.8, nu=0.25, L=0.4)
    path = tmp_path / "s.qtns"
    write_snapshot(path, g, p, st)
    g2, p2, st2 = read_snapshot(path)
    assert g2.n == g.n and g2.length == g.length
    assert p2 == p
    assert np.array_equal(st2.u, st.u) and np.array_equal(st2.q, st.q) and st2.t == st.t
    path2 = tmp_path / "s2.qtns"
    write_snapshot(path2, g2, p2, st2)
    assert path.read_bytes() == path2.read_bytes()


def test_snapshot_truncated(tmp_path):
    g, st = random_state()
    p = ModelParams(a=-0.2, b=0.8, c=1.0, gamma=0.8, nu=0.25, L=0.4)
    path = tmp_path / "s.qtns"
    write_snapshot(path, g, p, st)
    raw = path.read_bytes()
    path.write_bytes(raw[: len(raw) // 2])
    with pytest.raises(SnapshotError, match="short read"):
        read_snapshot(path)


def test_snapshot_bad_magic(tmp_path):
    g, st = random_state()
    p = ModelParams(a=-0.2, b=0.8, c=1.0, gamma=0.8, nu=0.25, L=0.4)
    path = tmp_path / "s.qtns"
    write_snapshot(path, g, p, st)
    raw = bytearray(path.read_bytes())
    raw[:4] = b"XXXX"
    path.write_bytes(bytes(raw))
    with pytest.raises(SnapshotError, match="magic"):
        read_snapshot(path)


def test_snapshot_divergence_flagged(tmp_path):
    g, st = random_state()
    x, _ = g.nodes()
    st.u[0] += 0.5 * np.cos(x)  # injects divergence -0.5 sin x
    p = ModelParams(a=-0.2, b=0.8, c=1.0, gamma=0.8, nu=0.25, L=0.4)
    path = tmp_path / "s.qtns"
    write_snapshot(path, g, p, st)
    with pytest.raises(SnapshotError, match="divergence"):
        read_snapshot(path)


# -- CSV series ------------------------------------------------------------------------


def test_series_roundtrip_exact(tmp_path):
    t = np.array([0.0, 1.0 / 3.0])
    series = {"a": np.array([1.0, math.pi]), "b": np.array([-1e-17, 2.0**0.5])}
    path = tmp_path / "s.csv"
    emit_series(path, t, series)
    t2, s2 = read_series(path)
    assert np.array_equal(t, t2)
    for k in series:
        assert np.array_equal(series[k], s2[k])


def test_series_single_sample_two_lines(tmp_path):
    path = tmp_path / "one.csv"
    emit_series(path, np.array([0.5]), {"x": np.array([2.0])})
    assert path.read_text().count("\n") == 2


def test_series_empty_rejected(tmp_path):
    with pytest.raises(ValueError):
        emit_series(tmp_path / "e.csv", np.array([]), {})


# -- CLI ---------------------------------------------------------------------------------


def test_cli_simulate_deterministic(tmp_path):
    cfg1 = tmp_path / "r1.cfg"
    cfg1.write_text(full_config(tmp_path / "out1"))
    cfg2 = tmp_path / "r2.cfg"
    cfg2.write_text(full_config(tmp_path / "out2"))
    assert main(["simulate", str(cfg1)]) == 0
    assert main(["simulate", str(cfg2)]) == 0
    s1 = (tmp_path / "out1" / "series.csv").read_bytes()
    s2 = (tmp_path / "out2" / "series.csv").read_bytes()
    assert s1 == s2
    f1 = (tmp_path / "out1" / "final.qtns").read_bytes()
    f2 = (tmp_path / "out2" / "final.qtns").read_bytes()
    assert f1 == f2


def test_cli_analyze_and_norms(tmp_path):
    cfg = tmp_path / "r.cfg"
    out = tmp_path / "out"
    cfg.write_text(full_config(out, extra="probes = hs:0.5\n"))
    assert main(["simulate", str(cfg)]) == 0
    assert main(["analyze", str(out), "--check", "all", "--s", "0.5"]) == 0
    assert (out / "reports.csv").exists()
    assert main(["norms", str(out / "final.qtns"), "--spec", "0.5,2,2"]) == 0
    assert main(["norms", str(out / "final.qtns"), "--spec=-0.5,inf,inf"]) == 0


def test_cli_twin(tmp_path):
    cfg = tmp_path / "r.cfg"
    out = tmp_path / "out"
    cfg.write_text(full_config(out))
    assert main(["twin", str(cfg), "--eps", "1e-4", "--seed", "3"]) == 0
    assert (out / "twin_eps0.0001_seed3.csv").exists()


def test_cli_check_subset(tmp_path):
    assert main(["check", "partition", "--n", "64"]) == 0
    assert main(["check", "cancellation", "--trials", "5", "--n", "32",
                 "--csv", str(tmp_path / "rep.csv")]) == 0
    assert (tmp_path / "rep.csv").exists()


def test_cli_error_paths(tmp_path):
    with pytest.raises(SystemExit):
        main(["check", "nonexistent_check"])
    with pytest.raises(SystemExit):
        main(["analyze", str(tmp_path / "missing")])
    bad = tmp_path / "bad.cfg"
    bad.write_text(MINIMAL.replace("c = 1.0", "c = -2.0"))
    with pytest.raises(SystemExit, match="c must be positive"):
        main(["simulate", str(bad)])
