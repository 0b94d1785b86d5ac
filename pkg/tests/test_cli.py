import json
import os
import subprocess
import sys

import numpy as np
import pytest

from givenscd.cli import main
from givenscd.descent import StoppingRule
from givenscd.gmm import sample_gmm, separated_model
from givenscd.formats import read_matrix, read_tensor, write_matrix, write_tensor
from givenscd.manifold import random_orthogonal
from givenscd.spca import spca_full
from givenscd.tensor import synth_orthogonal_tensor


def run(*argv):
    return main([str(a) for a in argv])


def metrics(out):
    with open(os.path.join(out, "metrics.json")) as fh:
        return json.load(fh)


def read_trace(path):
    with open(path) as fh:
        header = fh.readline().rstrip("\n").split("\t")
        rows = [line.rstrip("\n").split("\t") for line in fh]
    return header, rows


def dir_bytes(path):
    out = {}
    for root, _, files in os.walk(path):
        for name in files:
            full = os.path.join(root, name)
            with open(full, "rb") as fh:
                out[os.path.relpath(full, path)] = fh.read()
    return out


@pytest.fixture
def data(tmp_path):
    A = np.random.default_rng(0).standard_normal((8, 6))
    path = tmp_path / "A.csv"
    write_matrix(path, A)
    return A, path


# --- spca -----------------------------------------------------------------------------

def test_spca_outputs(data, tmp_path):
    A, path = data
    out = tmp_path / "out"
    assert run("spca", path, "--gamma", 0.4, "--seed", 1, "--out-dir", out) == 0
    m = metrics(out)
    assert m["schema_version"] == 1
    for key in ("objective", "adjusted_variance", "adjusted_variance_fraction", "sparsity", "flops"):
        assert key in m
    Z = read_matrix(out / "loadings.csv")
    assert Z.shape == (8, 6)
    header, rows = read_trace(out / "trace.tsv")
    assert header == ["iteration", "objective", "cumulative_flops", "nnz"]
    assert float(rows[-1][1]) == pytest.approx(m["objective"], rel=1e-12)
    assert int(rows[-1][2]) <= m["flops"]


def test_spca_matches_library(data, tmp_path):
    A, path = data
    out = tmp_path / "out"
    run("spca", path, "--gamma", 0.4, "--seed", 3, "--max-iters", 40, "--out-dir", out)
    # the CLI keeps the default relative tolerance and only overrides the cap
    loadings, trace, _ = spca_full(A, 0.4, seed=3, stop=StoppingRule(max_iters=40, rel_tol=1e-10))
    assert np.array_equal(read_matrix(out / "loadings.csv"), loadings.Z)
    assert metrics(out)["objective"] == trace.final_value


def test_spca_gamma_zero_constant_trace(data, tmp_path):
    A, path = data
    out = tmp_path / "out"
    assert run("spca", path, "--gamma", 0, "--seed", 0, "--max-iters", 30, "--out-dir", out) == 0
    _, rows = read_trace(out / "trace.tsv")
    f = np.array([float(r[1]) for r in rows])
    assert np.all(np.abs(f - np.sum(A**2)) <= 1e-8 * np.sum(A**2))


def test_trace_parses_back_losslessly(data, tmp_path):
    _, path = data
    out = tmp_path / "out"
    run("spca", path, "--gamma", 0.4, "--seed", 2, "--max-iters", 25, "--out-dir", out)
    _, rows = read_trace(out / "trace.tsv")
    text = "".join("\t".join(r) + "\n" for r in rows)
    again = "".join("\t".join([r[0], "%.17g" % float(r[1]), str(int(r[2])), str(int(r[3]))]) + "\n" for r in rows)
    assert text == again
    assert [int(r[0]) for r in rows] == list(range(26))


def test_missing_file_exit_2(tmp_path, capsys):
    assert run("spca", tmp_path / "nope.csv", "--gamma", 1, "--seed", 0, "--out-dir", tmp_path) == 2
    assert "nope.csv" in capsys.readouterr().err


def test_degenerate_gamma_exit_2(data, tmp_path, capsys):
    _, path = data
    assert run("spca", path, "--gamma", 1000, "--seed", 0, "--out-dir", tmp_path / "o") == 2
    assert "gamma" in capsys.readouterr().err


def test_malformed_matrix_exit_2(tmp_path, capsys):
    p = tmp_path / "bad.csv"
    p.write_text("1,2\n3,x\n")
    assert run("spca", p, "--gamma", 0.1, "--seed", 0, "--out-dir", tmp_path / "o") == 2
    assert "bad.csv:2" in capsys.readouterr().err


def test_seed_is_mandatory(data):
    _, path = data
    with pytest.raises(SystemExit) as info:
        run("spca", path, "--gamma", 0.1)
    assert info.value.code == 2


@pytest.mark.parametrize("flag,value", [("--gamma", -1), ("--max-iters", -3)])
def test_invalid_numbers_rejected_at_parse_time(data, flag, value):
    _, path = data
    argv = ["spca", path, "--gamma", 0.1, "--seed", 0]
    if flag == "--gamma":
        argv[3] = value
    else:
        argv += [flag, value]
    with pytest.raises(SystemExit) as info:
        run(*argv)
    assert info.value.code == 2


def test_components_must_match_for_full_case(data, tmp_path):
    _, path = data
    assert run("spca", path, "--gamma", 0.1, "--components", 3, "--seed", 0, "--out-dir", tmp_path / "o") == 2


def test_repeat_writes_one_directory_per_seed(data, tmp_path):
    _, path = data
    out = tmp_path / "rep"
    assert run("spca", path, "--gamma", 0.4, "--seed", 5, "--repeat", 3, "--max-iters", 10, "--out-dir", out) == 0
    assert sorted(os.listdir(out)) == ["seed-5", "seed-6", "seed-7"]
    assert metrics(out / "seed-6")["seed"] == 6


# --- spca-stream ------------------------------------------------------------------------

def test_early_stop_preset_consumes_140_of_1000(tmp_path):
    S = np.random.default_rng(1).standard_normal((1000, 5))
    p = tmp_path / "S.csv"
    write_matrix(p, S)
    out = tmp_path / "out"
    assert run("spca-stream", p, "--transpose", "--gamma", 0.3, "--components", 4,
               "--early-stop-frac", "--seed", 0, "--out-dir", out) == 0
    assert metrics(out)["samples_consumed"] == 140
    assert metrics(out)["early_stop_frac"] == 0.14


def test_stream_of_m_samples_matches_spca(data, tmp_path):
    A, path = data
    run("spca-stream", path, "--gamma", 0.4, "--components", 6, "--inner-iters", 300,
        "--seed", 4, "--out-dir", tmp_path / "s")
    run("spca", path, "--gamma", 0.4, "--max-iters", 300, "--tol", 0, "--seed", 4, "--out-dir", tmp_path / "b")
    assert metrics(tmp_path / "s")["objective"] == pytest.approx(metrics(tmp_path / "b")["objective"], abs=1e-6)


def test_stream_insufficient_samples_exit_2(data, tmp_path):
    _, path = data
    assert run("spca-stream", path, "--gamma", 0.1, "--components", 7, "--seed", 0, "--out-dir", tmp_path / "o") == 2
    assert run("spca-stream", path, "--gamma", 0.1, "--components", 3, "--early-stop-frac", 0.2,
               "--seed", 0, "--out-dir", tmp_path / "o") == 2


def test_stream_layouts_agree(data, tmp_path):
    A, path = data
    write_matrix(tmp_path / "rows.csv", A.T)
    run("spca-stream", path, "--gamma", 0.3, "--components", 3, "--seed", 9, "--out-dir", tmp_path / "a")
    run("spca-stream", tmp_path / "rows.csv", "--transpose", "--gamma", 0.3, "--components", 3,
        "--seed", 9, "--out-dir", tmp_path / "b")
    assert dir_bytes(tmp_path / "a") == dir_bytes(tmp_path / "b")


# --- tensor -------------------------------------------------------------------------------

def test_synth_round_trip(tmp_path, capsys):
    out = tmp_path / "t"
    assert run("tensor", "--synth", "1.0,1.5,2.0,1.2,1.8", "--seed", 2, "--out-dir", out) == 0
    m = metrics(out)
    assert m["residual"] <= 1e-8
    assert "residual=" in capsys.readouterr().out
    assert sorted(m["lambdas"]) == pytest.approx([1.0, 1.2, 1.5, 1.8, 2.0], abs=1e-8)
    T = read_tensor(out / "tensor.txt")
    V = read_matrix(out / "factors.csv")
    assert np.allclose(synth_orthogonal_tensor(m["lambdas"], V, check=False), T, atol=1e-8)


def test_zero_tensor_flags_null(tmp_path):
    p = tmp_path / "z.txt"
    write_tensor(p, np.zeros((3, 3, 3)))
    out = tmp_path / "o"
    assert run("tensor", p, "--seed", 0, "--out-dir", out) == 0
    m = metrics(out)
    assert m["lambdas"] == [0.0, 0.0, 0.0] and m["null"] == [True, True, True]


def test_asymmetric_tensor_is_symmetrized_with_flag(tmp_path, capsys):
    rng = np.random.default_rng(3)
    T = synth_orthogonal_tensor([1.0, 2.0, 3.0], random_orthogonal(3, rng))
    T[0, 1, 2] += 1e-6
    p = tmp_path / "t.txt"
    write_tensor(p, T)
    out = tmp_path / "o"
    assert run("tensor", p, "--seed", 0, "--out-dir", out) == 0
    assert metrics(out)["symmetrized"] is True
    assert "symmetrizing" in capsys.readouterr().err


def test_nearly_symmetric_tensor_not_flagged(tmp_path):
    T = synth_orthogonal_tensor([1.0, 2.0], random_orthogonal(2, 0))
    T[0, 0, 1] += 1e-11
    p = tmp_path / "t.txt"
    write_tensor(p, T)
    out = tmp_path / "o"
    assert run("tensor", p, "--seed", 0, "--out-dir", out) == 0
    assert metrics(out)["symmetrized"] is False


def test_malformed_tensor_exit_2_with_line(tmp_path, capsys):
    p = tmp_path / "t.txt"
    p.write_text("2\n1 2 3 4\n5 6 seven 8\n")
    assert run("tensor", p, "--seed", 0, "--out-dir", tmp_path / "o") == 2
    assert "t.txt:3" in capsys.readouterr().err


def test_modes_agree(tmp_path):
    args = ["tensor", "--synth", "1,2,1.5,1.1,1.7,1.3", "--seed", 7]
    run(*args, "--mode", "naive", "--out-dir", tmp_path / "n")
    run(*args, "--mode", "accelerated", "--out-dir", tmp_path / "a")
    assert metrics(tmp_path / "n")["objective"] == pytest.approx(metrics(tmp_path / "a")["objective"], abs=1e-9)


# --- gmm ------------------------------------------------------------------------------------

def test_gmm_separated_preset_nmi(tmp_path, capsys):
    out = tmp_path / "g"
    assert run("gmm", "--dim", 10, "-k", 5, "--n-samples", 100000, "--preset", "separated",
               "--seed", 0, "--out-dir", out) == 0
    m = metrics(out)
    # value measured during development and pinned: 0.99016614260615243
    assert m["nmi"] == pytest.approx(0.9901661426061524, abs=1e-12)
    assert m["nmi"] >= 0.95
    assert "nmi=" in capsys.readouterr().out
    with open(out / "model.json") as fh:
        model = json.load(fh)
    assert model["k"] == 5 and len(model["means"]) == 5 and len(model["means"][0]) == 10


def test_gmm_k_above_dim_exit_2(tmp_path):
    assert run("gmm", "--dim", 3, "-k", 4, "--n-samples", 100, "--seed", 0, "--out-dir", tmp_path) == 2


def test_gmm_too_few_samples_exit_2(tmp_path):
    assert run("gmm", "--dim", 10, "-k", 2, "--n-samples", 5, "--seed", 0, "--out-dir", tmp_path) == 2


def test_gmm_from_sample_file(tmp_path):
    X, labels = sample_gmm(separated_model(4, 2, 0), 3000, 1)
    write_matrix(tmp_path / "X.csv", X)
    write_matrix(tmp_path / "y.csv", labels[:, None])
    out = tmp_path / "o"
    assert run("gmm", tmp_path / "X.csv", "--transpose", "--labels", tmp_path / "y.csv", "-k", 2,
               "--seed", 0, "--out-dir", out) == 0
    assert metrics(out)["nmi"] >= 0.9


def test_gmm_invwishart_preset_runs(tmp_path):
    out = tmp_path / "o"
    code = run("gmm", "--dim", 6, "-k", 3, "--n-samples", 20000, "--preset", "invwishart", "--seed", 1, "--out-dir", out)
    # moment recovery can legitimately fail on badly separated draws; that must
    # surface as a numeric failure, never a crash
    assert code in (0, 3)


# --- determinism and entry point ------------------------------------------------------------

@pytest.mark.parametrize(
    "argv",
    [
        ["spca", "{A}", "--gamma", "0.4", "--max-iters", "60"],
        ["spca-stream", "{A}", "--gamma", "0.4", "--components", "3"],
        ["tensor", "--synth", "1,2,3,1.5"],
        ["gmm", "--dim", "5", "-k", "3", "--n-samples", "5000"],
    ],
)
def test_byte_identical_reruns(data, tmp_path, argv):
    _, path = data
    argv = [a.replace("{A}", str(path)) for a in argv]
    assert run(*argv, "--seed", 11, "--out-dir", tmp_path / "r1") == 0
    assert run(*argv, "--seed", 11, "--out-dir", tmp_path / "r2") == 0
    a, b = dir_bytes(tmp_path / "r1"), dir_bytes(tmp_path / "r2")
    assert a == b and a


def test_module_entry_point(data, tmp_path):
    _, path = data
    proc = subprocess.run(
        [sys.executable, "-m", "givenscd", "spca", str(path), "--gamma", "0.4", "--seed", "0",
         "--max-iters", "5", "--out-dir", str(tmp_path / "o")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.startswith("spca seed=0 ")
