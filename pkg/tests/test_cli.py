import io
import os
import subprocess
import sys

import numpy as np
import pytest

from s5lab import scan
from s5lab.cli import checkpoint
from s5lab.cli.commands import BENCH_HEADER, cmd_bench, cmd_verify
from s5lab.cli.config import RunConfig, format_config, load_config, parse_config
from s5lab.cli.main import main
from s5lab.errors import FormatError
from s5lab.scan import ScanElement
from s5lab.train.model import ModelConfig, init_model


def test_parse_config_values_and_comments():
    cfg = parse_config("# comment\nH = 16  # trailing\n\nconj_sym=false\nlr=0.5\ndiscretization=bilinear\n")
    assert cfg.H == 16 and cfg.conj_sym is False and cfg.lr == 0.5
    assert cfg.discretization == "bilinear" and cfg.P == RunConfig().P


@pytest.mark.parametrize("text,line", [
    ("H=4\nwidth=3\n", 2),
    ("H=4\nH=5\n", 2),
    ("depth=two\n", 1),
    ("\n\nnonsense line\n", 3),
    ("discretization=euler\n", 1),
    ("conj_sym=maybe\n", 1),
    ("batch=0\n", 1),
])
def test_parse_config_errors_carry_line(text, line):
    with pytest.raises(FormatError) as exc:
        parse_config(text)
    assert exc.value.line == line
    assert f"line {line}" in str(exc.value)


def test_config_round_trip():
    cfg = RunConfig(H=8, conj_sym=False, dataset="irregular", lr=0.25)
    again = parse_config(format_config(cfg))
    assert format_config(again) == format_config(cfg)


def test_seed_env_override(tmp_path):
    p = tmp_path / "c.conf"
    p.write_text("seed=3\n")
    assert load_config(p, environ={}).seed == 3
    assert load_config(p, environ={"S5_SEED": "11"}).seed == 11
    with pytest.raises(FormatError):
        load_config(p, environ={"S5_SEED": "x"})


def test_checkpoint_round_trip_and_dtypes(tmp_path):
    tensors = [("a", np.arange(6, dtype=np.float32).reshape(2, 3)),
               ("b", np.array([1.5, -2.0])),
               ("c", np.array([1 + 2j, 3 - 1j], dtype=np.complex64)),
               ("d", np.array([[0.5j]])), ("scalar", np.array(4.0))]
    blob = checkpoint.encode(tensors)
    back = checkpoint.decode(blob)
    for (n1, a1), (n2, a2) in zip(tensors, back):
        assert n1 == n2 and a1.dtype == a2.dtype and a1.shape == a2.shape
        np.testing.assert_array_equal(a1, a2)
    assert checkpoint.encode(back) == blob
    assert blob[:8] == b"S5CKPT01"
    assert blob[8:12] == (5).to_bytes(4, "little")
    # first tensor header: name length, name, dtype code 0, rank 2, dims 2 and 3
    assert blob[12:14] == (1).to_bytes(2, "little") and blob[14:15] == b"a"
    assert blob[15:17] == bytes([0, 2])
    assert blob[17:33] == (2).to_bytes(8, "little") + (3).to_bytes(8, "little")


def test_checkpoint_rejects_corruption():
    blob = checkpoint.encode([("x", np.ones(3))])
    for bad in (blob[:-1], b"NOTCKPT1" + blob[8:], blob + b"\0"):
        with pytest.raises(FormatError):
            checkpoint.decode(bad)
    with pytest.raises(FormatError) as exc:
        checkpoint.decode(blob[:20])
    assert exc.value.offset is not None


def test_model_checkpoint_round_trip(tmp_path):
    cfg = ModelConfig(H=4, P=4)
    m = init_model(cfg)
    path = tmp_path / "m.ckpt"
    checkpoint.save(path, checkpoint.model_tensors(m))
    other = checkpoint.load_into_model(init_model(ModelConfig(H=4, P=4, seed=9)), checkpoint.load(path))
    assert checkpoint.encode(checkpoint.model_tensors(other)) == path.read_bytes()
    with pytest.raises(FormatError):
        checkpoint.load_into_model(init_model(ModelConfig(H=8, P=4)), checkpoint.load(path))


def test_verify_suite_passes():
    out = io.StringIO()
    assert cmd_verify(["scan", "assoc"], out=out) == 0
    assert "PASS  scan.parallel_vs_sequential" in out.getvalue()


def test_verify_catches_sign_error_in_binop(monkeypatch):
    def broken(e_i, e_j):
        return ScanElement(e_j[0] * e_i[0], e_j[0] * e_i[1] - e_j[1])

    monkeypatch.setattr(scan, "scan_binop", broken)
    out = io.StringIO()
    assert cmd_verify(["assoc"], out=out) == 1
    assert "FAIL  assoc.binop_groupings" in out.getvalue()
    assert "FAILED 1 of 1 checks: assoc.binop_groupings" in out.getvalue()


def test_verify_corollary_emits_csv(monkeypatch):
    from s5lab import checks

    original = checks.corollary1_checks
    monkeypatch.setitem(
        __import__("s5lab.cli.commands", fromlist=["SUITES"]).SUITES, "corollary1",
        lambda report=None: original(seeds=(0,), N_values=(16, 32), steps=2048, report=report))
    out = io.StringIO()
    assert cmd_verify(["corollary1"], out=out) == 0
    lines = out.getvalue().splitlines()
    i = lines.index("N,e_N,K,seed")
    assert lines[i + 1].startswith("16,") and lines[i + 2].startswith("32,")


def test_bench_schema_independent_of_repeats():
    tables = []
    for repeats in (1, 5):
        out = io.StringIO()
        cmd_bench([256, 512], 4, 2, [1, 2], repeats=repeats, out=out)
        tables.append(out.getvalue().splitlines())
    for t in tables:
        assert t[0] == BENCH_HEADER
        assert [row.split(",")[0] for row in t[1:]] == \
            ["sequential_scan", "parallel_scan", "parallel_scan", "fft_conv_siso_bank"] * 2
    assert [r.split(",")[:6] for r in tables[0][1:]] == [r.split(",")[:6] for r in tables[1][1:]]


def test_main_error_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.conf"
    bad.write_text("H=4\nbogus=1\n")
    assert main(["train", "--config", str(bad)]) == 2
    assert "line 2" in capsys.readouterr().err
    missing = tmp_path / "m.conf"
    missing.write_text("dataset=mnist\ntrain_images=a\ntrain_labels=b\ntest_images=c\ntest_labels=d\n")
    assert main(["train", "--config", str(missing)]) == 2
    assert "not found" in capsys.readouterr().err


def _tiny_config(tmp_path, **extra):
    lines = ["dataset=irregular", "classes=2", "seq_len=16", "train_items=24", "test_items=12",
             "depth=1", "H=4", "P=4", "epochs=2", "batch=8", "workers=2"]
    lines += [f"{k}={v}" for k, v in extra.items()]
    p = tmp_path / "tiny.conf"
    p.write_text("\n".join(lines) + "\n")
    return p


def test_train_then_eval(tmp_path, capsys):
    conf = _tiny_config(tmp_path)
    assert main(["train", "--config", str(conf)]) == 0
    train_out = capsys.readouterr().out.splitlines()
    metrics = (tmp_path / "metrics.csv").read_text().splitlines()
    assert metrics[0] == "epoch,step,loss,accuracy,lr"
    assert len(metrics) == 4 and metrics[-1].startswith("eval,")
    assert main(["eval", "--config", str(conf), "--ckpt", str(tmp_path / "model.s5ckpt")]) == 0
    eval_out = capsys.readouterr().out.splitlines()
    assert eval_out[-1].split(",")[2:4] == train_out[-1].split(",")[2:4]


def test_train_twice_identical_checkpoints(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    for d in (a, b):
        assert main(["train", "--config", str(_tiny_config(d))]) == 0
    assert (a / "model.s5ckpt").read_bytes() == (b / "model.s5ckpt").read_bytes()


def test_eval_truncated_checkpoint(tmp_path, capsys):
    conf = _tiny_config(tmp_path)
    assert main(["train", "--config", str(conf)]) == 0
    ck = tmp_path / "model.s5ckpt"
    ck.write_bytes(ck.read_bytes()[:-7])
    capsys.readouterr()
    assert main(["eval", "--config", str(conf), "--ckpt", str(ck)]) == 2
    assert "truncated" in capsys.readouterr().err


def test_console_entry_point():
    env = dict(os.environ)
    r = subprocess.run([sys.executable, "-m", "s5lab", "verify", "--suite", "assoc"],
                       capture_output=True, text=True, env=env)
    assert r.returncode == 0, r.stderr
    assert "all 1 checks passed" in r.stdout
