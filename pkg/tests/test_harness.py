import csv
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relaxnn import config as cfgmod
from relaxnn.cli import main
from relaxnn.fvref import Grid1D
from relaxnn.metrics import (
    ReferenceField,
    evaluate,
    load_reference,
    network_field,
    reference_solution,
    relative_l2,
    write_report,
)
from relaxnn.mlp import MlpConfig, init_he_uniform
from relaxnn.systems import CATALOG, Kind, ProblemSpec, get_problem
from relaxnn.trainer import LossWeights, TrainConfig, train
from relaxnn.uq import UQ_PROBLEMS

# relative_l2


def test_relative_l2_examples():
    ref = np.array([[1.0, 0.0], [0.0, 2.0]])
    assert relative_l2(ref, ref) == 0.0
    assert relative_l2(np.zeros_like(ref), ref) == 1.0
    assert relative_l2([1.0, 1.0], [1.0, 0.0]) == 1.0
    with pytest.raises(ValueError):
        relative_l2([1.0], [0.0])
    with pytest.raises(ValueError):
        relative_l2([1.0, 2.0], [1.0])


arrays = st.lists(st.floats(-10, 10), min_size=4, max_size=4)


@settings(max_examples=100, deadline=None)
@given(arrays, arrays, st.floats(0.01, 100) | st.floats(-100, -0.01))
def test_relative_l2_scale_covariant(a, b, c):
    a, b = np.array(a), np.array(b)
    if np.linalg.norm(b) < 1e-3:
        b = b + 1.0
    assert relative_l2(c * a, c * b) == pytest.approx(relative_l2(a, b), rel=1e-12, abs=1e-12)
    assert relative_l2(a, b) >= 0.0


# evaluate and reports


def _const_problem():
    return ProblemSpec("const", Kind.BURGERS, 0.0, 1.0, -1.0, 1.0, "riemann", (0.5,), (0.5,), relax=1)


def test_reference_solution_samples_coarse_centers():
    prob = get_problem("swe-dam")
    ref = reference_solution(prob, 40, 3, [0.0, 0.1])
    assert ref.stacked().shape == (2, 40, 2)
    coarse = Grid1D.for_problem(prob, 40).centers
    np.testing.assert_array_equal(ref.centers, coarse)
    fine = Grid1D.for_problem(prob, 120).centers
    np.testing.assert_allclose(fine[1::3], coarse, atol=1e-14)
    assert ref.values[0][0].tolist() == list(prob.left)
    with pytest.raises(ValueError):
        reference_solution(prob, 40, 2)


def test_identical_fields_give_zero_error(tmp_path):
    prob = get_problem("euler-sod")
    u = init_he_uniform(MlpConfig.from_sizes([2, 5, 3]), 3)
    centers = np.linspace(-0.7, 0.7, 15)
    pred = network_field(u, [0.0, 0.2], centers)
    ref = ReferenceField([0.0, 0.2], centers, list(pred))
    report = evaluate(u, prob, ref)
    assert report.relative_l2 == 0.0
    assert np.all(report.abs_error == 0.0)
    assert set(report.per_component) == {"rho", "u", "p"}
    paths = write_report(report, prob, tmp_path)
    assert [p.name for p in paths] == [
        "error_report.csv", "abs_error.csv", "slice_t0.000000.csv", "slice_t0.200000.csv",
    ]
    rows = list(csv.reader(open(tmp_path / "slice_t0.200000.csv")))
    assert rows[0] == ["x", "pred_rho", "pred_u", "pred_p", "ref_rho", "ref_u", "ref_p"]
    assert float(rows[1][0]) == centers[0]


def test_random_network_is_far_from_reference():
    prob = get_problem("burgers-riemann")
    cfg = cfgmod.build("burgers-riemann")
    u = init_he_uniform(MlpConfig.from_sizes(cfg.u_sizes), 1)
    ref = reference_solution(prob, 400, 5)
    assert evaluate(u, prob, ref).relative_l2 > 0.1


def test_trained_toy_network_matches_reference():
    prob = _const_problem()
    res = train(
        prob, [2, 1], [2, 1], LossWeights((1.0,), (1.0,), 1.0, 1.0),
        TrainConfig(epochs=1000, lr=3e-2), counts=(64, 16, 16),
    )
    ref = reference_solution(prob, 400, 5, [0.0, 0.5, 1.0])
    assert evaluate(res.u_params, prob, ref).relative_l2 < 1e-4


def test_load_reference_missing(tmp_path):
    with pytest.raises(FileNotFoundError, match="missing reference"):
        load_reference(tmp_path, get_problem("burgers-riemann"))


# config


PROBLEMS = sorted(CATALOG) + sorted(UQ_PROBLEMS)


@st.composite
def configs(draw):
    name = draw(st.sampled_from(PROBLEMS))
    kind = get_problem(name).kind
    mode = draw(st.sampled_from(cfgmod.MODES))
    relax = draw(st.integers(1, kind.n_rows))
    cfg = cfgmod.build(name, mode, relax)
    train_cfg = replace(
        cfg.train,
        epochs=draw(st.integers(0, 10**6)),
        lr=draw(st.floats(1e-6, 1.0)),
        seed=draw(st.integers(0, 2**31)),
        resample=draw(st.booleans()),
    )
    w = cfg.weights
    weights = LossWeights(
        tuple(draw(st.floats(0.0, 50.0)) for _ in w.residual),
        w.flux,
        draw(st.floats(0.0, 50.0)),
        draw(st.floats(0.0, 50.0)),
    )
    ref = cfgmod.ReferenceConfig(
        draw(st.integers(2, 1000)), draw(st.sampled_from([1, 3, 5])), 0.5,
        tuple(draw(st.lists(st.floats(0.0, 0.1), max_size=3))),
    )
    return replace(cfg, train=train_cfg, weights=weights, reference=ref, out=draw(st.sampled_from(["runs/a", "x"])))


@settings(max_examples=60, deadline=None)
@given(configs())
def test_config_round_trip(cfg):
    text = cfgmod.serialize(cfg)
    back = cfgmod.parse(text)
    assert back == cfg
    assert cfgmod.serialize(back) == text


def test_shipped_configs_load():
    from pathlib import Path

    root = Path(__file__).resolve().parents[1] / "configs"
    files = sorted(root.glob("*.cfg"))
    assert len(files) == 9
    for f in files:
        cfg = cfgmod.load(f)
        assert cfgmod.parse(cfgmod.serialize(cfg)) == cfg


def test_defaults_fill_missing_keys():
    cfg = cfgmod.parse("[experiment]\nproblem = euler-sod\nrelax_type = 3\n")
    assert cfg.u_sizes[-1] == 3 and cfg.v_sizes[-1] == 1
    assert cfg.weights.flux == (0.0, 0.0, cfg.weights.flux[2])
    assert cfg.train.epochs == 600_000
    pinn = cfgmod.parse("[experiment]\nproblem = burgers-riemann\nmode = pinn\n")
    assert pinn.v_sizes is None and pinn.relax_type is None


@pytest.mark.parametrize(
    "text",
    [
        "[experiment]\nmode = pinn\n",
        "[experiment]\nproblem = nope\n",
        "[experiment]\nproblem = burgers-riemann\nmode = other\n",
        "[experiment]\nproblem = burgers-riemann\nrelax_type = 2\n",
        "[experiment]\nproblem = burgers-riemann\ncolor = red\n",
        "[experiment]\nproblem = burgers-riemann\n[extra]\na = 1\n",
        "[experiment]\nproblem = burgers-riemann\n[networks]\nu = 2, 8, 2\n",
        "[experiment]\nproblem = euler-sod\nrelax_type = 3\n[weights]\nflux = 1, 0, 1\n",
        "[experiment]\nproblem = burgers-riemann\n[training]\nepochs = many\n",
        "[experiment]\nproblem = burgers-riemann\n[training]\nresample = maybe\n",
        "[experiment]\nproblem = burgers-riemann\n[uq]\nmethod = sparse\n",
        "[experiment]\nproblem = burgers-riemann\n[sampling]\ninterior = 0\n",
        "not an ini file",
    ],
)
def test_invalid_configs_rejected(text):
    with pytest.raises(cfgmod.ConfigError):
        cfgmod.parse(text)


# cli


def small_config(tmp_path, name="burgers-riemann", **kw):
    cfg = cfgmod.build(name)
    n_out = cfg.u_sizes[-1]
    cfg = replace(
        cfg,
        u_sizes=(cfg.u_sizes[0], 6, n_out),
        v_sizes=(cfg.v_sizes[0], 6, cfg.v_sizes[-1]),
        train=replace(cfg.train, epochs=5, checkpoint_every=0),
        counts=(20, 6, 6),
        reference=cfgmod.ReferenceConfig(40, 3, 0.5, (0.0, 0.2)),
        uq=cfgmod.UQConfig("quad", 100, 2, 8, 20, 4),
        out=str(tmp_path / "run"),
        **kw,
    )
    path = tmp_path / f"{name}.cfg"
    path.write_text(cfgmod.serialize(cfg))
    return path


def test_cli_train_reference_evaluate(tmp_path, capsys):
    cfg = small_config(tmp_path)
    out = tmp_path / "run"
    assert main(["evaluate", "--config", str(cfg)]) == 2
    assert "missing reference" in capsys.readouterr().err
    assert main(["train", "--config", str(cfg)]) == 0
    assert (out / "checkpoints" / "u_final.bin").is_file()
    assert len((out / "history.jsonl").read_text().splitlines()) == 5
    assert main(["reference", "--config", str(cfg)]) == 0
    assert sorted(p.name for p in (out / "reference").iterdir()) == [
        "snapshot_t0.000000.csv", "snapshot_t0.200000.csv",
    ]
    assert main(["evaluate", "--config", str(cfg)]) == 0
    names = sorted(p.name for p in (out / "eval").iterdir())
    assert names == ["abs_error.csv", "error_report.csv", "slice_t0.000000.csv", "slice_t0.200000.csv"]


def test_cli_pinn_override_and_seed(tmp_path):
    cfg = small_config(tmp_path)
    out = tmp_path / "pinn"
    assert main(["train", "--config", str(cfg), "--mode", "pinn", "--epochs", "2", "--out", str(out), "--seed", "7"]) == 0
    saved = cfgmod.load(out / "config.cfg")
    assert saved.mode == "pinn" and saved.train.epochs == 2 and saved.seed == 7
    assert not (out / "checkpoints" / "v_final.bin").exists()


def test_cli_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        main(["fly"])
    assert info.value.code != 0
    assert main(["train"]) == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("[experiment]\nproblem = nope\n")
    assert main(["train", "--config", str(bad)]) == 2
    assert "unknown problem" in capsys.readouterr().err
    assert main(["train", "--config", str(tmp_path / "absent.cfg")]) == 2


def test_cli_uq_quadrature(tmp_path):
    cfg = small_config(tmp_path, "swe-2shock-uq")
    out = tmp_path / "run"
    assert main(["reference", "--config", str(cfg)]) == 0
    assert main(["uq", "--config", str(cfg), "--stage", "all"]) == 0
    rows = list(csv.reader(open(out / "uq" / "moments_t0.200000.csv")))
    assert rows[0] == ["t", "x", "mean_h", "mean_u", "var_h", "var_u"]
    assert len(rows) == 21
    report = list(csv.reader(open(out / "uq" / "uq_report.csv")))
    assert report[0] == ["t", "mean_relative_l2", "variance_relative_l2"]
    assert len(report) == 3


def test_cli_grad_check(tmp_path):
    assert main(["grad-check", "--draws", "1", "--cases", "5", "--out", str(tmp_path)]) == 0
    rows = list(csv.reader(open(tmp_path / "grad_check.csv")))
    assert rows[0] == ["check", "case", "relative_deviation", "tolerance", "passed"]
    assert all(r[-1] == "1" for r in rows[1:])


def test_cli_determinism(tmp_path):
    cfg = small_config(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        for cmd in ("train", "reference", "evaluate"):
            assert main([cmd, "--config", str(cfg), "--out", str(out)]) == 0
    for rel in ("history.jsonl", "points.csv", "eval/error_report.csv", "eval/abs_error.csv"):
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel
    assert (a / "checkpoints/u_final.bin").read_bytes() == (b / "checkpoints/u_final.bin").read_bytes()


def test_figure_times_emit_slices(tmp_path):
    cfg_path = small_config(tmp_path, "euler-sod")
    cfg = cfgmod.load(cfg_path)
    cfg = replace(cfg, reference=replace(cfg.reference, times=()))
    cfg_path.write_text(cfgmod.serialize(cfg))
    for cmd in ("train", "reference", "evaluate"):
        assert main([cmd, "--config", str(cfg_path)]) == 0
    slices = sorted(p.name for p in (tmp_path / "run" / "eval").glob("slice_*.csv"))
    assert slices == [f"slice_t{t:.6f}.csv" for t in (0.0, 0.08, 0.16, 0.24, 0.32, 0.40)]
