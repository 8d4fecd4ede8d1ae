import csv
import json

import numpy as np
import pytest

from levyscale.cli import main
from levyscale.errors import ValidationError
from levyscale.harness import PRINTED_5_1, RunConfig, compare_5_1, model_from_spec, run
from levyscale.models import table1_model


def write_config(tmp_path, name="cfg.json", **overrides):
    cfg = {"model": {"preset": "table1", "sigma": 0.2, "lam": 0.2}, "q": 0.03, "solver": "classic",
           "grid": {"x_min": 0.0, "x_max": 2.0, "step": 0.05}}
    cfg.update(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


class TestRunConfig:
    def test_grid_points(self):
        cfg = RunConfig(model=table1_model(0.2), q=0.03, grid=(0.0, 1.0, 0.25))
        np.testing.assert_allclose(cfg.grid_points(), [0, 0.25, 0.5, 0.75, 1.0])

    @pytest.mark.parametrize("kw", [
        {"grid": (0.0, 1.0, 0.0)},
        {"grid": (1.0, 0.0, 0.1)},
        {"tol": 1e-3},
        {"tol": 0.0},
        {"m": 0},
        {"q": 0.0},
        {"solver": "dual"},
    ])
    def test_invalid(self, kw):
        with pytest.raises(ValidationError):
            RunConfig(model=table1_model(0.2), **{"q": 0.03, **kw}).validate()

    def test_roundtrip(self, tmp_path):
        cfg = RunConfig.from_json(write_config(tmp_path))
        again = RunConfig.from_dict(cfg.to_dict())
        assert again.model == cfg.model and again.grid == cfg.grid

    def test_malformed(self):
        with pytest.raises(ValidationError):
            RunConfig.from_dict({"q": 0.03})

    def test_presets(self):
        assert model_from_spec({"preset": "table1", "sigma": 0.4}) == table1_model(0.4)
        with pytest.raises(ValidationError):
            model_from_spec({"preset": "weibull"})


class TestRun:
    def test_manifest_contents(self, tmp_path):
        cfg = RunConfig.from_json(write_config(tmp_path, out_dir=str(tmp_path / "out")))
        man = run(cfg)
        for key in ("zeta", "varrho", "kappa", "delta_m", "epsilon_m", "identity_residual",
                    "laplace_worst_error", "status"):
            assert key in man
        assert man["status"] == "OK"
        assert man["identity_residual"] <= 1e-8
        assert man["solver"]["levels"][0] == pytest.approx(0.481, abs=0.01)
        on_disk = read_json(tmp_path / "out" / "manifest.json")
        assert set(on_disk["files"]) == {"scale.csv", "solver.json", "value.csv", "manifest.json"}

    def test_csv_layout(self, tmp_path):
        run(RunConfig.from_json(write_config(tmp_path, out_dir=str(tmp_path / "out"))))
        rows = list(csv.reader(open(tmp_path / "out" / "scale.csv")))
        assert rows[0][0] == "x" and len(rows) == 42
        # 12 significant digits
        assert len(rows[5][1].replace("-", "").replace(".", "").split("e")[0].lstrip("0")) <= 12

    def test_deterministic(self, tmp_path):
        outs = []
        for k in range(2):
            out = tmp_path / f"run{k}"
            run(RunConfig.from_json(write_config(tmp_path, out_dir=str(out))))
            outs.append(out)
        for name in ("scale.csv", "value.csv", "solver.json"):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()

    def test_error_carries_config_path(self, tmp_path):
        path = write_config(tmp_path, solver="bailout", params={"phi": 0.5}, out_dir=str(tmp_path / "o"))
        with pytest.raises(ValidationError, match="cfg.json"):
            run(RunConfig.from_json(path))

    def test_bounds_run(self, tmp_path):
        path = write_config(tmp_path, model={"preset": "beta_family"}, m=15, out_dir=str(tmp_path / "b"))
        man = run(RunConfig.from_json(path))
        assert man["solver"]["level_interval"][0] == 0.0
        assert man["status"] == "OK"


class TestMain:
    def test_solve_classic(self, tmp_path, capsys):
        path = write_config(tmp_path)
        assert main(["solve", "classic", "--config", str(path), "--out", str(tmp_path / "o")]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["levels"][0] == pytest.approx(0.481, abs=0.01)

    def test_solve_impulse_flags(self, tmp_path, capsys):
        path = write_config(tmp_path)
        assert main(["solve", "impulse", "--delta", "0.5", "--config", str(path), "--out", str(tmp_path / "o")]) == 0
        levels = json.loads(capsys.readouterr().out)["levels"]
        np.testing.assert_allclose(levels, [0.069, 1.527], atol=0.02)

    def test_impulse_needs_delta(self, tmp_path):
        assert main(["solve", "impulse", "--config", str(write_config(tmp_path)), "--out", str(tmp_path)]) == 2

    def test_scale_and_roots(self, tmp_path, capsys):
        path = write_config(tmp_path)
        assert main(["scale", "--config", str(path), "--out", str(tmp_path / "s")]) == 0
        assert (tmp_path / "s" / "scale.csv").exists()
        assert main(["roots", "--config", str(path), "--out", str(tmp_path / "r")]) == 0
        assert read_json(tmp_path / "r" / "roots.json")["interlaced"]

    def test_bounds(self, tmp_path):
        path = write_config(tmp_path, model={"preset": "beta_family"})
        assert main(["bounds", "--config", str(path), "--m", "15", "--out", str(tmp_path / "b")]) == 0
        assert (tmp_path / "b" / "bounds.csv").exists()

    def test_bounds_rejects_finite_model(self, tmp_path):
        assert main(["bounds", "--config", str(write_config(tmp_path)), "--out", str(tmp_path / "b")]) == 2

    def test_zero_grid_step(self, tmp_path):
        path = write_config(tmp_path)
        assert main(["scale", "--config", str(path), "--grid", "0:1:0", "--out", str(tmp_path)]) == 2

    def test_bad_grid_syntax(self, tmp_path):
        assert main(["scale", "--config", str(write_config(tmp_path)), "--grid", "0:1"]) == 2

    def test_malformed_json(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["scale", "--config", str(bad)]) == 2
        bad.write_text("[1, 2]")
        assert main(["scale", "--config", str(bad)]) == 2

    def test_missing_config(self, tmp_path):
        assert main(["scale", "--config", str(tmp_path / "nope.json")]) == 2
        assert main(["scale"]) == 2

    def test_unknown_verb(self):
        assert main(["plot"]) == 2

    def test_unknown_section(self, tmp_path):
        assert main(["reproduce", "5.3", "--out", str(tmp_path)]) == 2

    def test_numerical_failure_exit_code(self, tmp_path):
        # psi(s) = q cannot be bracketed when the drift is negligible and q is huge
        spec = {"sigma": 0.0, "drift": 1e-12, "jumps": {"type": "beta_family", "c": 0.1, "alpha": 3.0,
                                                         "beta": 1.0, "shape": 0.5}}
        path = write_config(tmp_path, model=spec, q=1e9, m=5)
        assert main(["scale", "--config", str(path), "--out", str(tmp_path / "f")]) == 3

    def test_cgmy_sweep(self, tmp_path, capsys):
        assert main(["cgmy-sweep", "--betas", "1,0.5", "--m", "60", "--out", str(tmp_path)]) == 0
        assert len(read_json(tmp_path / "cgmy_sweep.json")["u_sup_diffs"]) == 1


class TestReproduce:
    @pytest.fixture(scope="class")
    @classmethod
    def section_51(cls, tmp_path_factory):
        out = tmp_path_factory.mktemp("r51")
        assert main(["reproduce", "5.1", "--out", str(out)]) == 0
        return out

    def test_files_51(self, section_51):
        s = read_json(section_51 / "summary.json")
        assert len(s["files"]) == 11
        for name in s["files"]:
            rows = list(csv.reader(open(section_51 / name)))
            assert rows[0] == ["x", "sigma=0.0", "sigma=0.2", "sigma=0.4"]
            assert len(rows) == 302

    def test_all_printed_numbers_compared(self, section_51):
        s = read_json(section_51 / "summary.json")
        assert s["compared"] == sum(len(v) for v in PRINTED_5_1.values()) == 18
        assert s["reconciliation"]["lam"] == 0.2

    def test_reproduce_52(self, tmp_path):
        assert main(["reproduce", "5.2", "--out", str(tmp_path)]) == 0
        s = read_json(tmp_path / "summary.json")
        assert s["betas"] == [1.0, 0.5, 0.25, 0.125]
        assert {"fig6_W_m15.csv", "fig6_W_m150.csv", "fig8_u_mid.csv"} <= set(s["files"])
        assert s["cgmy"]["u_diffs_decreasing"]


def test_compare_rows_shape():
    rows = compare_5_1(0.2)
    assert len(rows) == 18
    assert {r["quantity"] for r in rows} == set(PRINTED_5_1)
