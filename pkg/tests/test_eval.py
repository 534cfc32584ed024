import numpy as np
import pytest

from symotflow import ShapeError, Tensor
from symotflow.data import DatasetSpec, generate
from symotflow.evaluate import (
    MetricsReport,
    evaluate,
    export_correspondence,
    sweep_beta,
    write_metrics_csv,
    write_sweep_csv,
)
from symotflow.flow import composed_permutation, init_model
from symotflow.kernels import KernelBank, mmd_distance
from symotflow.report import correspondence_figure, sweep_figure, trace_figure
from symotflow.train import TrainConfig


def identity_model():
    # seed 6 composes its two block permutations back to the identity
    model = init_model(dim=2, blocks=2, subnet_width=8, seed=6)
    assert np.array_equal(composed_permutation(model), [0, 1])
    return model


def perturbed_model(rng, seed=0):
    model = init_model(dim=2, blocks=2, subnet_width=8, seed=seed)
    for p in model.parameters():
        p.data = rng.normal(0, 0.3, p.data.shape)
    return model


class TestEvaluate:
    def test_identity_model_on_matched_sets_gives_zeros(self, rng):
        model = identity_model()
        bank = KernelBank((1.0,), (1.0,))
        x = rng.normal(0, 1, (30, 2))
        rep = evaluate(model, bank, x, x.copy())
        assert rep.ot_fwd == 0.0 and rep.ot_bwd == 0.0
        assert rep.mmd_fwd < 1e-7 and rep.mmd_bwd < 1e-7

    def test_matches_componentwise_oracle(self, rng):
        model = perturbed_model(rng)
        bank = KernelBank((0.8, 1.6), (0.5, 0.5))
        x = rng.normal(0, 1, (25, 2))
        z = rng.normal(1, 1, (25, 2))
        rep = evaluate(model, bank, x, z)

        tx = model.forward(Tensor(x)).data
        tz = model.inverse(Tensor(z)).data
        assert rep.ot_fwd == pytest.approx(np.mean(np.sum((x - tx) ** 2, axis=1)), rel=1e-12)
        assert rep.ot_bwd == pytest.approx(np.mean(np.sum((tz - z) ** 2, axis=1)), rel=1e-12)
        assert rep.mmd_fwd == pytest.approx(mmd_distance(bank, tx, z), rel=1e-12)
        assert rep.mmd_bwd == pytest.approx(mmd_distance(bank, x, tz), rel=1e-12)
        assert rep.n_test == 25

    def test_hash_is_sensitive_to_inputs(self, rng):
        model = perturbed_model(rng)
        bank = KernelBank((1.0,), (1.0,))
        x = rng.normal(0, 1, (10, 2))
        z = rng.normal(1, 1, (10, 2))
        a = evaluate(model, bank, x, z).config_hash
        b = evaluate(model, bank, x + 1.0, z).config_hash
        assert a != b
        assert a == evaluate(model, bank, x, z).config_hash

    def test_empty_test_set_rejected(self, rng):
        model = identity_model()
        bank = KernelBank((1.0,), (1.0,))
        with pytest.raises(ShapeError):
            evaluate(model, bank, np.zeros((0, 2)), rng.normal(0, 1, (5, 2)))

    def test_wrong_dimension_rejected(self, rng):
        model = identity_model()
        bank = KernelBank((1.0,), (1.0,))
        with pytest.raises(ShapeError):
            evaluate(model, bank, rng.normal(0, 1, (5, 3)), rng.normal(0, 1, (5, 3)))


class TestCorrespondence:
    def test_export_has_2n_rows_and_reverifies(self, tmp_path, rng):
        model = perturbed_model(rng)
        x = rng.normal(0, 1, (17, 2))
        z = rng.normal(1, 1, (13, 2))
        path = tmp_path / "pairs.csv"
        export_correspondence(model, x, z, path)

        lines = path.read_text().splitlines()
        assert lines[0] == "src0,src1,dst0,dst1,direction"
        assert len(lines) == 1 + 17 + 13

        fwd = [l.split(",") for l in lines[1:] if l.endswith("fwd")]
        bwd = [l.split(",") for l in lines[1:] if l.endswith("bwd")]
        assert len(fwd) == 17 and len(bwd) == 13

        # re-apply the model to the written sources; images must match
        src = np.array([[float(r[0]), float(r[1])] for r in fwd])
        dst = np.array([[float(r[2]), float(r[3])] for r in fwd])
        np.testing.assert_allclose(model.forward(Tensor(src)).data, dst, atol=1e-12)

        bsrc = np.array([[float(r[0]), float(r[1])] for r in bwd])
        bdst = np.array([[float(r[2]), float(r[3])] for r in bwd])
        np.testing.assert_allclose(model.inverse(Tensor(bdst)).data, bsrc, atol=1e-12)


class TestMetricsCSV:
    def test_layout(self, tmp_path):
        rep = MetricsReport(1.5, 2.5, 0.25, 0.125, 100, "abcd")
        path = tmp_path / "metrics.csv"
        write_metrics_csv(path, [("moons2circles", "symot", 0.03, rep, 7)])
        lines = path.read_text().splitlines()
        assert lines[0] == "dataset,method,beta,ot_fwd,ot_bwd,mmd_fwd,mmd_bwd,seed"
        fields = lines[1].split(",")
        assert fields[0] == "moons2circles" and fields[1] == "symot"
        assert [float(v) for v in fields[2:7]] == [0.03, 1.5, 2.5, 0.25, 0.125]
        assert fields[7] == "7"


class TestSweep:
    def small_setup(self):
        x = generate(DatasetSpec(kind="moons", n=120, seed=0))
        z = generate(DatasetSpec(kind="circles", n=120, seed=0))
        xt = generate(DatasetSpec(kind="moons", n=80, seed=1000))
        zt = generate(DatasetSpec(kind="circles", n=80, seed=1000))
        cfg = TrainConfig(epochs=2, batch_size=40, blocks=2, subnet_width=8, seed=0)
        return cfg, x, z, xt, zt

    def test_single_beta_matches_direct_train_and_evaluate(self):
        from symotflow.train import make_bank, train

        cfg, x, z, xt, zt = self.small_setup()
        rows = sweep_beta(cfg, [0.05], x, z, xt, zt)
        assert len(rows) == 1

        from dataclasses import replace

        direct_cfg = replace(cfg, beta=0.05)
        model, _ = train(x, z, direct_cfg)
        rep = evaluate(model, make_bank(x, z, direct_cfg), xt, zt)
        assert rows[0] == (0.05, rep.ot_fwd, rep.mmd_fwd)

    def test_empty_beta_list_rejected(self):
        cfg, x, z, xt, zt = self.small_setup()
        with pytest.raises(ValueError):
            sweep_beta(cfg, [], x, z, xt, zt)

    def test_failure_names_the_offending_beta(self):
        cfg, x, z, xt, zt = self.small_setup()
        with pytest.raises(RuntimeError, match="beta=-1"):
            sweep_beta(cfg, [-1.0], x, z, xt, zt)

    def test_sweep_csv_round_trips(self, tmp_path):
        path = tmp_path / "sweep.csv"
        rows = [(0.1, 2.5, 0.03), (1.0, 0.5, 0.25)]
        write_sweep_csv(path, rows)
        lines = path.read_text().splitlines()
        assert lines[0] == "beta,ot,mmd"
        parsed = [tuple(float(v) for v in l.split(",")) for l in lines[1:]]
        assert parsed == rows


class TestFigures:
    def svg_ok(self, path):
        import xml.etree.ElementTree as ET

        root = ET.parse(path).getroot()
        assert root.tag.endswith("svg")

    def test_correspondence_figure_writes_valid_svg(self, tmp_path, rng):
        model = perturbed_model(rng)
        x = rng.normal(0, 1, (40, 2))
        z = rng.normal(1, 1, (40, 2))
        path = tmp_path / "pairs.svg"
        correspondence_figure(model, x, z, path)
        self.svg_ok(path)

    def test_sweep_figure_writes_valid_svg(self, tmp_path):
        path = tmp_path / "sweep.svg"
        sweep_figure([(0.01, 10.0, 0.01), (0.1, 1.0, 0.05), (1.0, 0.1, 0.2)], path)
        self.svg_ok(path)

    def test_trace_figure_writes_valid_svg(self, tmp_path):
        from symotflow.loss import LossBreakdown

        trace = [
            LossBreakdown(0.5 / (i + 1), 0.4 / (i + 1), 2.0, 1.5, 0.1, 1.0 / (i + 1), 0.9 / (i + 1))
            for i in range(5)
        ]
        path = tmp_path / "trace.svg"
        trace_figure(trace, path)
        self.svg_ok(path)
