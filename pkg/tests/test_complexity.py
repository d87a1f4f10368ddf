import numpy as np
import pytest

from rtfsnet import complexity as cx
from rtfsnet import model
from rtfsnet.config import ModelConfig


def cfg(**overrides):
    return ModelConfig().with_overrides([f"{k}={v}" for k, v in overrides.items()])


class TestParams:
    def test_encoder_closed_form(self):
        assert cx.param_rows(ModelConfig())["encoder"] == 4864

    @pytest.mark.parametrize("overrides", [{}, {"q": 1}, {"q": 3}, {"R": 12}, {"D": 32, "h_a": 16},
                                           {"C_a": 128, "h": 2}])
    def test_matches_weight_store(self, overrides):
        c = cfg(**overrides)
        stored = {m: sum(s.size for s in specs if s.trainable)
                  for m, specs in model.module_specs(c).items()}
        assert cx.param_rows(c) == stored

    def test_total_in_published_band(self):
        assert 665_100 <= cx.analyze(ModelConfig()).total_params <= 812_900

    def test_depth_independent(self):
        assert cx.analyze(cfg(R=4)).total_params == cx.analyze(cfg(R=12)).total_params


class TestMacs:
    def test_shared_block_scales_with_depth(self):
        one = cx.mac_rows(cfg(R=1), 32000)["rtfs"]
        assert cx.mac_rows(cfg(R=5), 32000)["rtfs"] == 5 * one

    def test_affine_in_depth(self):
        rs = np.array([4, 6, 12])
        macs = np.array([cx.analyze(cfg(R=r)).total_macs for r in rs], dtype=float)
        coef = np.polyfit(rs, macs, 1)
        assert np.max(np.abs(np.polyval(coef, rs) - macs) / macs) < 1e-3

    def test_near_linear_in_duration(self):
        ratio = cx.analyze(ModelConfig(), 4.0).total_macs / cx.analyze(ModelConfig(), 2.0).total_macs
        assert 1.9 <= ratio <= 2.1

    def test_deeper_compression_is_cheaper(self):
        macs = [cx.analyze(cfg(q=q)).total_macs for q in (1, 2, 3)]
        assert macs[0] > macs[1] > macs[2]

    def test_encoder_closed_form(self):
        assert cx.mac_rows(ModelConfig(), 32000)["encoder"] == 256 * 251 * 129 * 2 * 9


class TestReport:
    @pytest.fixture
    def report(self):
        return cx.analyze(ModelConfig())

    def test_totals_are_row_sums(self, report):
        assert report.total_params == sum(r.params for r in report.rows)
        assert report.total_macs == sum(r.macs for r in report.rows)

    def test_json_round_trip(self, report):
        assert cx.CostReport.from_json(cx.report_table(report, "json")) == report

    def test_text_in_graph_order(self, report):
        lines = cx.report_table(report, "text").splitlines()
        order = [ln.split()[0] for ln in lines[2:] if ln and not ln.startswith("-")]
        assert order == list(model.MODULES) + ["total"]

    def test_csv_rows(self, report):
        lines = cx.report_table(report, "csv").strip().splitlines()
        assert len(lines) - 1 == len(model.MODULES) + 1
        assert lines[-1].startswith("total,676098,")

    def test_unknown_format(self, report):
        with pytest.raises(ValueError):
            cx.report_table(report, "xml")
