import numpy as np
import pytest

from sparsemac.cli import main
from sparsemac.tensor import DType, Kind
from sparsemac.traceio import (RecordKind, SynthSpec, TraceFile, TraceRecord,
                               synth_tensor, write_trace)


def _run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def _toy_trace(path):
    a = synth_tensor(SynthSpec(dims=(1, 32, 6, 6), sparsity=0.5, seed=1), Kind.A)
    w = synth_tensor(SynthSpec(dims=(4, 32, 3, 3), sparsity=0.0, seed=2), Kind.W)
    g = synth_tensor(SynthSpec(dims=(1, 4, 4, 4), sparsity=0.6, seed=3), Kind.G)
    recs = [
        TraceRecord(name="L0.A", kind=RecordKind.A, dtype=DType.F32, layer_id=0,
                    epoch_id=0, stride=1, kernel=(3, 3), dims=a.dims, tensor=a),
        TraceRecord(name="L0.W", kind=RecordKind.W, dtype=DType.F32, layer_id=0,
                    epoch_id=0, stride=1, kernel=(3, 3), dims=w.dims, tensor=w),
        TraceRecord(name="L0.G", kind=RecordKind.G, dtype=DType.F32, layer_id=0,
                    epoch_id=0, stride=1, kernel=(3, 3), dims=g.dims, tensor=g),
    ]
    write_trace(path, TraceFile(records=recs))


SYNTH = "s=0.5,dims=1,64,6,6,f=8,k=3,stride=1"


class TestSimulate:
    def test_speedup_within_cap(self, capsys):
        code, out, _ = _run(["simulate", "--synthetic", SYNTH, "--seed", "3"], capsys)
        assert code == 0
        rows = [l for l in out.splitlines() if l and not l.startswith("#")][1:]
        assert len(rows) == 3  # one per op
        for row in rows:
            speedup = float(row.split(",")[6])
            assert 1.0 <= speedup <= 3.0

    def test_dense_mode_speedup_exactly_one(self, capsys):
        code, out, _ = _run(["simulate", "--synthetic", SYNTH, "--mode", "dense"],
                            capsys)
        assert code == 0
        for row in [l for l in out.splitlines() if l and not l.startswith("#")][1:]:
            assert float(row.split(",")[6]) == 1.0

    def test_deterministic_output(self, capsys, tmp_path):
        argv = ["simulate", "--synthetic", SYNTH, "--seed", "11"]
        _, out1, _ = _run(argv, capsys)
        _, out2, _ = _run(argv, capsys)
        assert out1 == out2

    def test_config_echo_header(self, capsys):
        _, out, _ = _run(["simulate", "--synthetic", SYNTH, "--depth", "2"], capsys)
        header = [l for l in out.splitlines() if l.startswith("#")]
        assert "# depth=2" in header
        assert any(l.startswith("# seed=") for l in header)

    def test_trace_input(self, capsys, tmp_path):
        trace = tmp_path / "toy.tdtr"
        _toy_trace(trace)
        code, out, _ = _run(["simulate", "--trace", str(trace), "--op", "fwd"],
                            capsys)
        assert code == 0
        rows = [l for l in out.splitlines() if l and not l.startswith("#")][1:]
        assert len(rows) == 1 and ",fwd," in rows[0]

    def test_out_file(self, capsys, tmp_path):
        out_path = tmp_path / "report.csv"
        code, _, _ = _run(["simulate", "--synthetic", SYNTH,
                           "--out", str(out_path)], capsys)
        assert code == 0
        assert out_path.read_text().startswith("# rows=")

    def test_config_file_with_flag_override(self, capsys, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("depth = 2\nseed = 9\n# comment\nmode = sparse_b\n")
        _, out, _ = _run(["simulate", "--synthetic", SYNTH, "--config", str(cfg),
                          "--seed", "10"], capsys)
        header = [l for l in out.splitlines() if l.startswith("#")]
        assert "# depth=2" in header and "# seed=10" in header

    def test_custom_connectivity_from_config(self, capsys, tmp_path):
        from sparsemac.config import parse_connectivity
        cmap = parse_connectivity("0:0,1:0,2:0,1:-1,1:+1,2:-2,2:+2,1:-3", 16, 3)
        from sparsemac import default_connectivity
        assert cmap == default_connectivity(16, 3)
        cfg = tmp_path / "run.cfg"
        cfg.write_text("connectivity = 0:0,1:0,1:-1,1:+1,1:-3\ndepth = 2\n")
        code, out, _ = _run(["simulate", "--synthetic", SYNTH,
                             "--config", str(cfg)], capsys)
        assert code == 0
        assert any("connectivity=" in l for l in out.splitlines())

    def test_cost_table_overrides(self, tmp_path):
        from sparsemac.config import cost_table_from_settings
        from sparsemac.tensor import DType
        table = cost_table_from_settings({"cost.mac": "2.5",
                                          "cost.bf16.mac": "0.5"}, 16)
        assert table.costs(DType.F32).mac == 2.5
        assert table.costs(DType.BF16).mac == 0.5
        base = cost_table_from_settings({}, 16)
        assert table.costs(DType.F32).staging_read == \
            base.costs(DType.F32).staging_read


class TestRunExperimentApi:
    def test_rows_match_cli_output(self):
        from sparsemac.cli import run_experiment
        from sparsemac.config import RunConfig, parse_synth
        cfg = RunConfig(synth=parse_synth(SYNTH), seed=5, op="all")
        rows = run_experiment(cfg)
        assert len(rows) == 3
        for row in rows:
            assert 1.0 <= row["speedup"] <= 3.0
            assert row["dense_cycles"] >= row["sparse_cycles"]
            assert set(row) == {"epoch", "layer", "op", "side", "dense_cycles",
                                "sparse_cycles", "speedup", "effectual_fraction",
                                "energy_dense", "energy_sparse", "energy_eff",
                                "bypass"}


class TestErrors:
    def test_missing_trace_file(self, capsys):
        code, _, err = _run(["simulate", "--trace", "/nonexistent.tdtr"], capsys)
        assert code == 2
        assert "error:" in err

    def test_malformed_trace_no_crash(self, capsys, tmp_path):
        bad = tmp_path / "bad.tdtr"
        bad.write_bytes(b"JUNKJUNKJUNK")
        code, _, err = _run(["analyze", "--trace", str(bad)], capsys)
        assert code == 2
        assert "error:" in err

    def test_analyze_requires_trace(self, capsys):
        code, _, err = _run(["analyze"], capsys)
        assert code == 2


class TestAnalyze:
    def test_census_columns(self, capsys, tmp_path):
        trace = tmp_path / "toy.tdtr"
        _toy_trace(trace)
        code, out, _ = _run(["analyze", "--trace", str(trace)], capsys)
        assert code == 0
        lines = [l for l in out.splitlines() if not l.startswith("#")]
        assert lines[0].startswith("name,kind,layer")
        assert len(lines) == 4
        frac = float(lines[1].split(",")[7])
        assert 0.45 < frac < 0.55


class TestSweep:
    def test_nine_point_sparsity_sweep(self, capsys):
        code, out, _ = _run(["sweep", "--sweep", "sparsity",
                             "--values", "0.1:0.9:0.1",
                             "--synthetic", "s=0.5,dims=1,64,4,4,f=4,k=3"], capsys)
        assert code == 0
        rows = [l for l in out.splitlines() if l and not l.startswith("#")][1:]
        assert len(rows) == 9
        speedups = [float(r.split(",")[3]) for r in rows]
        assert all(1.0 <= s <= 3.0 for s in speedups)
        assert speedups[-1] > speedups[0]

    def test_rows_sweep(self, capsys):
        code, out, _ = _run(["sweep", "--sweep", "rows", "--values", "1,4",
                             "--synthetic", "s=0.6,dims=1,64,4,4"], capsys)
        assert code == 0
        rows = [l for l in out.splitlines() if l and not l.startswith("#")][1:]
        sp = {int(r.split(",")[0]): float(r.split(",")[2]) for r in rows}
        assert sp[4] <= sp[1]


class TestCompressCmd:
    def test_ratio_bounds_and_output(self, capsys, tmp_path):
        trace = tmp_path / "toy.tdtr"
        _toy_trace(trace)
        out_path = tmp_path / "sched.tdtr"
        code, out, _ = _run(["compress", "--trace", str(trace),
                             "--out", str(out_path)], capsys)
        assert code == 0
        rows = [l for l in out.splitlines() if l and not l.startswith("#")][1:]
        assert len(rows) == 3
        for r in rows:
            ratio = float(r.split(",")[5])
            assert 1.0 <= ratio <= 3.0
        from sparsemac.traceio import read_trace
        back = read_trace(out_path)
        assert all(r.kind is RecordKind.SCHEDULED for r in back.records)
