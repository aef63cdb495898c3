import pytest

from phm import bench
from phm.bench import (CSV_COLUMNS, BenchConfig, DifferentialError, GenParams, emit_csv,
                       main, read_report_csv, run_benchmark)
from phm.header_codec import write_rules
from phm.matcher import TraceMatch
from phm.trace_io import TraceGenSpec, generate_rules, generate_trace, write_trace


@pytest.fixture(scope="module")
def rules():
    return generate_rules(300, 5)


@pytest.fixture
def inputs(tmp_path, rules):
    rules_path = tmp_path / "rules.txt"
    trace_path = tmp_path / "trace.pht"
    write_rules(rules, rules_path)
    write_trace(generate_trace(TraceGenSpec(1500, 3, 0.2, rules)).headers, trace_path)
    return rules_path, trace_path


def config_for(rules, count=1000, **kw):
    trace = generate_trace(TraceGenSpec(count, 11, 0.1, rules))
    return BenchConfig(rules=list(rules), trace=trace, **kw)


class TestRunBenchmark:
    def test_engines_agree(self, rules):
        for alg in ("boyer-moore", "horspool"):
            report = run_benchmark(config_for(rules, baseline_alg=alg))
            assert report.engines["phm"].matches == report.engines["baseline"].matches == [100]

    def test_shared_cache(self, rules):
        report = run_benchmark(config_for(rules, engine="phm", repeat=2))
        phm = report.engines["phm"]
        assert 0 < phm.cache_hits[0] and phm.cache_entries <= 8
        assert phm.cache_hits[1] == 1000

    def test_fresh_cache(self, rules):
        phm = run_benchmark(config_for(rules, engine="phm", repeat=3, cache="fresh")).engines["phm"]
        assert phm.cache_hits == [phm.cache_hits[0]] * 3
        assert phm.energy_evals == [phm.energy_evals[0]] * 3

    def test_repeat_samples(self, rules):
        report = run_benchmark(config_for(rules, repeat=3))
        for rep in report.engines.values():
            assert len(rep.elapsed) == 3 and all(t >= 0 for t in rep.elapsed)
            assert rep.compile_seconds > 0

    def test_workers_do_not_change_results(self, rules):
        one = run_benchmark(config_for(rules, workers=1)).engines
        three = run_benchmark(config_for(rules, workers=3)).engines
        assert one["phm"].matches == three["phm"].matches
        assert one["baseline"].matches == three["baseline"].matches
        assert three["phm"].cache_entries <= 8

    def test_deterministic_counters(self, inputs):
        rules_path, _ = inputs
        cfg = dict(rules_path=rules_path, gen=GenParams(800, 4, 0.3), repeat=2)
        a = run_benchmark(BenchConfig(**cfg)).engines["phm"]
        b = run_benchmark(BenchConfig(**cfg)).engines["phm"]
        assert (a.matches, a.energy_evals, a.cache_hits) == (b.matches, b.energy_evals,
                                                             b.cache_hits)

    def test_differential_failure(self, rules, monkeypatch):
        real = bench.baseline.match_trace

        def broken(records, pset):
            out = real(records, pset)
            ids = out.rule_ids.copy()
            if len(ids) > 5:
                ids[5] = 999999
            return TraceMatch(ids, out.energy_evals)

        monkeypatch.setattr(bench.baseline, "match_trace", broken)
        cfg = config_for(rules)
        with pytest.raises(DifferentialError) as info:
            run_benchmark(cfg)
        assert info.value.index == 5
        assert cfg.trace.headers[5].to_csv() in str(info.value)

    @pytest.mark.parametrize("kw", [dict(repeat=0), dict(engine="snort"), dict(cache="cold"),
                                    dict(baseline_alg="kmp"), dict(workers=0)])
    def test_invalid_config(self, kw):
        with pytest.raises(ValueError):
            BenchConfig(**kw)


class TestEmitCsv:
    def test_single_engine_one_row(self, rules, tmp_path):
        path = tmp_path / "r.csv"
        emit_csv(run_benchmark(config_for(rules, engine="baseline")), path)
        lines = path.read_text().splitlines()
        assert len(lines) == 2
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert lines[1].endswith(",,")

    def test_both_engines_two_reps(self, rules, tmp_path):
        path = tmp_path / "r.csv"
        report = run_benchmark(config_for(rules, repeat=2))
        emit_csv(report, path)
        rows = read_report_csv(path)
        assert len(path.read_text().splitlines()) == 5
        assert [(r["engine"], r["repetition"]) for r in rows] == [
            ("phm", "1"), ("phm", "2"), ("baseline", "1"), ("baseline", "2")]

    def test_values_round_trip(self, rules, tmp_path):
        path = tmp_path / "r.csv"
        report = run_benchmark(config_for(rules, repeat=2))
        emit_csv(report, path)
        rows = read_report_csv(path)
        for row in rows:
            rep = report.engines[row["engine"]]
            i = int(row["repetition"]) - 1
            assert int(row["packets"]) == rep.packets
            assert int(row["rules"]) == rep.rules
            assert float(row["elapsed_seconds"]) == rep.elapsed[i]
            assert int(row["matches"]) == rep.matches[i]
            if row["engine"] == "phm":
                assert int(row["energy_evals"]) == rep.energy_evals[i]
                assert int(row["cache_hits"]) == rep.cache_hits[i]
            else:
                assert row["energy_evals"] == row["cache_hits"] == ""


class TestGenParams:
    def test_parse(self):
        assert GenParams.parse("count=10,seed=3,match=0.5") == GenParams(10, 3, 0.5)
        assert GenParams.parse("count=7") == GenParams(7, 0, 0.1)

    @pytest.mark.parametrize("text", ["seed=1", "count=1,foo=2", "count"])
    def test_bad(self, text):
        with pytest.raises(ValueError):
            GenParams.parse(text)


class TestMain:
    def test_help(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["--help"])
        assert info.value.code == 0
        assert "--rules" in capsys.readouterr().out

    def test_missing_rules(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["--gen", "count=10"])
        assert info.value.code == 1

    def test_missing_trace_source(self, inputs):
        with pytest.raises(SystemExit) as info:
            main(["--rules", str(inputs[0])])
        assert info.value.code == 1

    def test_bad_engine(self, inputs):
        with pytest.raises(SystemExit) as info:
            main(["--rules", str(inputs[0]), "--gen", "count=5", "--engine", "snort"])
        assert info.value.code == 1

    def test_full_run(self, inputs, tmp_path):
        rules_path, trace_path = inputs
        out = tmp_path / "report.csv"
        code = main(["--rules", str(rules_path), "--trace", str(trace_path), "--engine", "both",
                     "--repeat", "2", "--baseline-alg", "horspool", "--cache", "fresh",
                     "--out", str(out)])
        assert code == 0
        rows = read_report_csv(out)
        assert len(rows) == 4
        assert {r["matches"] for r in rows} == {"300"}

    def test_generated_trace_to_stdout(self, inputs, capsys):
        assert main(["--rules", str(inputs[0]), "--gen", "count=200,seed=2,match=0.5"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == ",".join(CSV_COLUMNS) and len(lines) == 3

    def test_missing_file(self, tmp_path, capsys):
        code = main(["--rules", str(tmp_path / "nope.txt"), "--gen", "count=5"])
        assert code == 1
        assert "nope.txt" in capsys.readouterr().err

    def test_bad_rule_file(self, tmp_path, capsys):
        path = tmp_path / "rules.txt"
        path.write_text("1,0.0.0.0,0,0.0.0.0,0,0\n2,0.0.0.0,0,0.0.0.0,0,300\n")
        assert main(["--rules", str(path), "--gen", "count=5"]) == 1
        assert "line 2" in capsys.readouterr().err

    def test_differential_exit_code(self, inputs, monkeypatch):
        def boom(config):
            raise DifferentialError(0, generate_rules(1, 0)[0].header, 1, -1)

        monkeypatch.setattr(bench, "run_benchmark", boom)
        assert main(["--rules", str(inputs[0]), "--gen", "count=5"]) == 2

    def test_sweep(self, inputs, tmp_path, capsys, monkeypatch):
        monkeypatch.setattr(bench, "TABLE2_PACKETS", (450, 900))
        out = tmp_path / "sweep.csv"
        assert main(["--rules", str(inputs[0]), "--sweep", "--out", str(out)]) == 0
        rows = read_report_csv(out)
        assert sorted({r["packets"] for r in rows}) == ["450", "900"]
        assert "speedup" in capsys.readouterr().err


def test_gen_main(tmp_path):
    rules_path, trace_path = tmp_path / "r.txt", tmp_path / "t.csv"
    assert bench.gen_main(["--rules-out", str(rules_path), "--count", "40", "--raw",
                           "--trace-out", str(trace_path), "--packets", "60",
                           "--format", "csv"]) == 0
    assert main(["--rules", str(rules_path), "--trace", str(trace_path)]) == 0
