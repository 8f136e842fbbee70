import json

import numpy as np
import pytest

from cgdopt.analysis import rate_envelope
from cgdopt.core import InputError, LambdaSchedule
from cgdopt.experiments import (
    CSV_HEADER,
    DOMINANCE_SEED_THRESHOLD,
    PUBLISHED_IMPROVEMENTS,
    QN_SUITE_METHODS,
    ExperimentSpec,
    first_step_improvement,
    qn_suite,
    rows_to_csv,
    run_experiment,
    table1_suite,
    trace_rows,
    write_experiment_files,
    write_qn_suite_files,
    write_table1_files,
)
from cgdopt.functions import lookup
from cgdopt.optimizers import OptimizerConfig, run


def branin_spec(seeds=(0, 1, 2), lam=0.07, alpha=0.01, iters=12):
    sched = LambdaSchedule.constant(lam)
    configs = {
        "gd": OptimizerConfig(method="gd", alpha=alpha, iters=iters),
        "cgd-fd": OptimizerConfig(method="cgd-fd", alpha=alpha, lam=sched, iters=iters, threshold=3),
    }
    return ExperimentSpec(function="branin", configs=configs, seeds=tuple(seeds))


class TestRunExperiment:
    def test_pairing_same_x0_per_seed(self):
        res = run_experiment(branin_spec())
        by_seed = {}
        for o in res.outcomes:
            by_seed.setdefault(o.seed, []).append(o.x0)
        for xs in by_seed.values():
            for x in xs[1:]:
                np.testing.assert_array_equal(xs[0], x)

    def test_improvement_uses_first_step_only(self):
        res = run_experiment(branin_spec(seeds=(0,)))
        o = res.outcomes[0]
        f0 = o.trace.records[0].f
        f1 = o.trace.records[1].f
        assert o.improvement1 == pytest.approx((f0 - f1) / f0 * 100.0, rel=1e-12)

    def test_summary_materializes_defaults(self):
        res = run_experiment(branin_spec())
        cfg = res.summary["configs"]["gd"]
        assert cfg == {
            "method": "gd",
            "alpha": 0.01,
            "lambda": {"kind": "constant", "start": 0.0, "end": None, "length": None},
            "iters": 12,
            "threshold": 3,
            "fd_step": 0.01,
            "grad_tol": 0.0,
        }

    def test_lam_zero_pairs_produce_equal_f_values(self):
        sched = LambdaSchedule.constant(0.0)
        spec = ExperimentSpec(
            function="branin",
            configs={
                "gd": OptimizerConfig(method="gd", alpha=0.01, iters=10),
                "cgd-fd": OptimizerConfig(method="cgd-fd", alpha=0.01, lam=sched, iters=10, threshold=5),
            },
            seeds=(4,),
        )
        res = run_experiment(spec)
        gd_run = next(o for o in res.outcomes if o.optimizer == "gd")
        fd_run = next(o for o in res.outcomes if o.optimizer == "cgd-fd")
        n = min(len(gd_run.trace.records), len(fd_run.trace.records))
        for k in range(n):
            assert fd_run.trace.records[k].f == pytest.approx(gd_run.trace.records[k].f, abs=1e-12)

    def test_oversized_step_is_flagged_nonmonotone(self):
        # beyond the true stability bound 2/((1+2*lam*L)L) the stiffest mode
        # grows and f increases at some step; the summary flags the run
        fn = lookup("quadratic")
        env = rate_envelope(10.0, 1.0, 0.4)
        spec = ExperimentSpec(
            function="quadratic",
            configs={
                "cgd": OptimizerConfig(
                    method="cgd", alpha=10 * env.alpha_max, lam=LambdaSchedule.constant(0.4), iters=40
                )
            },
            seeds=(0, 1, 2),
        )
        res = run_experiment(spec)
        assert all(not r["monotone"] for r in res.summary["runs"])

    def test_x0_override_applies_to_all_runs(self):
        spec = ExperimentSpec(
            function="branin",
            configs={"gd": OptimizerConfig(method="gd", alpha=0.01, iters=5)},
            seeds=(0, 1),
            x0_override=(2.0, 3.0),
        )
        res = run_experiment(spec)
        for o in res.outcomes:
            np.testing.assert_array_equal(o.x0, [2.0, 3.0])

    def test_cgd_on_hessian_free_function_rejected(self):
        spec = ExperimentSpec(
            function="eggholder",
            configs={"cgd": OptimizerConfig(method="cgd", alpha=0.01, iters=5)},
            seeds=(0,),
        )
        with pytest.raises(InputError, match="cgd-fd"):
            run_experiment(spec)

    def test_unknown_function_rejected(self):
        spec = ExperimentSpec(
            function="nope",
            configs={"gd": OptimizerConfig(method="gd", alpha=0.01, iters=5)},
            seeds=(0,),
        )
        with pytest.raises(InputError):
            run_experiment(spec)

    def test_published_reference_attaches_only_on_exact_row(self):
        fn = lookup("branin")
        t = fn.table1
        sched = t.schedule(40)
        exact = {
            "gd": OptimizerConfig(method="gd", alpha=t.alpha, iters=40),
            "cgd-fd": OptimizerConfig(
                method="cgd-fd", alpha=t.alpha, lam=sched, iters=40, threshold=10
            ),
        }
        res = run_experiment(ExperimentSpec("branin", exact, (0,)))
        assert res.summary["published_reference"] == {"gd": 37.53, "cgd-fd": 87.07}
        res2 = run_experiment(branin_spec(seeds=(0,)))  # different iters/threshold
        assert res2.summary["published_reference"] is None

    def test_thread_cap_env_preserves_results(self, monkeypatch):
        base = run_experiment(branin_spec()).summary["runs"]
        monkeypatch.setenv("CGD_OPT_THREADS", "4")
        threaded = run_experiment(branin_spec()).summary["runs"]
        assert base == threaded
        monkeypatch.setenv("CGD_OPT_THREADS", "not-a-number")
        with pytest.raises(InputError):
            run_experiment(branin_spec())


class TestSerialization:
    def test_csv_header_is_frozen(self):
        assert CSV_HEADER == "k,grad_evals,f_minus_fstar,grad_norm,direction,lambda"

    def test_trace_rows_and_csv(self):
        fn = lookup("branin")
        cfg = OptimizerConfig(method="gd", alpha=0.01, iters=4)
        tr = run(fn.objective, cfg, [2.0, 3.0])
        rows = trace_rows(tr, fn.f_star)
        assert [r["k"] for r in rows] == [0, 1, 2, 3]
        assert rows[0]["grad_evals"] == 0
        text = rows_to_csv(rows)
        lines = text.splitlines()
        assert lines[0] == CSV_HEADER
        assert len(lines) == 5
        # floats round-trip through the 17-significant-digit format
        first = lines[1].split(",")
        assert float(first[2]) == rows[0]["f_minus_fstar"]
        assert float(first[3]) == rows[0]["grad_norm"]

    def test_determinism_byte_identical(self):
        a = run_experiment(branin_spec())
        b = run_experiment(branin_spec())
        fa = a.function.f_star
        for oa, ob in zip(a.outcomes, b.outcomes):
            assert rows_to_csv(trace_rows(oa.trace, fa)) == rows_to_csv(trace_rows(ob.trace, fa))
        assert json.dumps(a.summary, sort_keys=True) == json.dumps(b.summary, sort_keys=True)

    def test_write_experiment_files(self, tmp_path):
        res = run_experiment(branin_spec(seeds=(0, 1)))
        payload = {
            "summary": res.summary,
            "traces": [
                {
                    "optimizer": o.optimizer,
                    "seed": o.seed,
                    "rows": trace_rows(o.trace, res.function.f_star),
                }
                for o in res.outcomes
            ],
        }
        paths = write_experiment_files(payload, tmp_path, "csv")
        names = sorted(p.name for p in paths)
        assert names == [
            "branin_cgd-fd_seed0.csv",
            "branin_cgd-fd_seed1.csv",
            "branin_gd_seed0.csv",
            "branin_gd_seed1.csv",
            "summary.json",
        ]
        for p in paths:
            assert p.exists()
            assert not p.with_name(p.name + ".tmp").exists()
        content = (tmp_path / "branin_gd_seed0.csv").read_text()
        assert content.startswith(CSV_HEADER + "\n")
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["function"] == "branin"

    def test_write_json_format(self, tmp_path):
        res = run_experiment(branin_spec(seeds=(0,)))
        payload = {
            "summary": res.summary,
            "traces": [
                {
                    "optimizer": o.optimizer,
                    "seed": o.seed,
                    "rows": trace_rows(o.trace, res.function.f_star),
                }
                for o in res.outcomes
            ],
        }
        paths = write_experiment_files(payload, tmp_path, "json")
        trace = json.loads((tmp_path / "branin_gd_seed0.json").read_text())
        assert trace["rows"][0]["k"] == 0
        with pytest.raises(InputError):
            write_experiment_files(payload, tmp_path, "xml")


class TestSuites:
    def test_table1_suite_shape_and_references(self):
        s = table1_suite(range(3))
        assert [r["function"] for r in s["rows"]] == [
            "quadratic",
            "rotated-hyper-ellipsoid",
            "levy",
            "branin",
            "griewank",
            "matyas",
        ]
        assert (s["iters"], s["threshold"]) == (40, 10)
        assert s["policy"]["dominance_seed_threshold"] == DOMINANCE_SEED_THRESHOLD
        for row in s["rows"]:
            assert row["published_reference"] == PUBLISHED_IMPROVEMENTS[row["function"]]
            assert 0.0 <= row["dominance_fraction"] <= 1.0

    def test_published_reference_values_are_verbatim(self):
        assert PUBLISHED_IMPROVEMENTS["quadratic"] == {"gd": 18.89, "cgd-fd": 97.91}
        assert PUBLISHED_IMPROVEMENTS["rotated-hyper-ellipsoid"] == {"gd": 15.94, "cgd-fd": 82.76}
        assert PUBLISHED_IMPROVEMENTS["levy"] == {"gd": 23.73, "cgd-fd": 63.21}
        assert PUBLISHED_IMPROVEMENTS["branin"] == {"gd": 37.53, "cgd-fd": 87.07}
        assert PUBLISHED_IMPROVEMENTS["griewank"] == {"gd": 0.01, "cgd-fd": 0.08}
        assert PUBLISHED_IMPROVEMENTS["matyas"] == {"gd": 1.83, "cgd-fd": 34.40}

    def test_qn_suite_shape(self):
        s = qn_suite(range(2))
        assert sorted(s["functions"]) == ["drop-wave", "eggholder", "zakharov"]
        for data in s["functions"].values():
            assert sorted(data["series"]) == sorted(QN_SUITE_METHODS)
            for series in data["series"].values():
                assert len(series) == 40
            assert data["variant_trajectory_gap_median"] is not None

    def test_table1_files(self, tmp_path):
        s = table1_suite(range(2))
        paths = write_table1_files(s, tmp_path)
        assert sorted(p.name for p in paths) == ["table1_summary.csv", "table1_summary.json"]
        lines = (tmp_path / "table1_summary.csv").read_text().splitlines()
        assert lines[0].startswith("function,n,lambda,alpha,")
        assert len(lines) == 7

    def test_qn_files(self, tmp_path):
        s = qn_suite(range(2))
        paths = write_qn_suite_files(s, tmp_path)
        names = sorted(p.name for p in paths)
        assert names == ["qn_drop-wave.csv", "qn_eggholder.csv", "qn_summary.json", "qn_zakharov.csv"]
        lines = (tmp_path / "qn_zakharov.csv").read_text().splitlines()
        assert lines[0] == "k," + ",".join(QN_SUITE_METHODS)
        assert len(lines) == 41


class TestImprovementHelper:
    def test_nan_when_no_step(self):
        fn = lookup("branin")
        cfg = OptimizerConfig(method="gd", alpha=0.01, iters=3, grad_tol=100.0)
        tr = run(fn.objective, cfg, [2.0, 3.0])  # exits immediately
        assert not tr.records
        assert np.isnan(first_step_improvement(tr))

    def test_single_record_uses_final(self):
        fn = lookup("branin")
        cfg = OptimizerConfig(method="gd", alpha=0.01, iters=1)
        tr = run(fn.objective, cfg, [2.0, 3.0])
        f0, f1 = tr.records[0].f, tr.final_f
        assert first_step_improvement(tr) == pytest.approx((f0 - f1) / f0 * 100)
