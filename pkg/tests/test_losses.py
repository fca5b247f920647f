import math

import pytest
import torch

from conftest import run_total_objective_gradcheck
from demesh.losses import (LossReport, adv_d_loss, adv_g_loss, cycle_loss, total_objective)


def const_map(v, shape=(1, 1, 4, 4)):
    return torch.full(shape, float(v))


class TestAdvDLoss:
    def test_perfect_discriminator_near_zero(self):
        loss = adv_d_loss(const_map(1.0 - 1e-7), const_map(1e-7))
        assert abs(loss.item()) < 1e-5

    def test_coin_flip_scores_equal_two_ln_two(self):
        loss = adv_d_loss(const_map(0.5), const_map(0.5))
        assert abs(loss.item() - 2 * math.log(2)) < 1e-6

    def test_swap_symmetry_identity(self):
        # loss(a, 1-a) = 2 * (-mean log a)
        g = torch.Generator().manual_seed(0)
        a = torch.rand((1, 1, 5, 5), generator=g) * 0.8 + 0.1
        loss = adv_d_loss(a, 1.0 - a)
        assert torch.allclose(loss, -2.0 * torch.log(a).mean(), atol=1e-6)

    def test_finite_even_at_extremes(self):
        loss = adv_d_loss(const_map(0.0), const_map(1.0))
        assert torch.isfinite(loss)


class TestAdvGLoss:
    def test_half_scores_closed_form(self):
        assert abs(adv_g_loss(const_map(0.5), "minimax").item() - math.log(0.5)) < 1e-6
        assert abs(adv_g_loss(const_map(0.5), "non_saturating").item() + math.log(0.5)) < 1e-6

    def test_fooled_discriminator_limit(self):
        loss = adv_g_loss(const_map(1.0), "non_saturating")
        assert 0.0 <= loss.item() < 1e-5

    def test_monotone_decreasing_in_score(self):
        for mode in ("minimax", "non_saturating"):
            prev = None
            for s in (0.1, 0.3, 0.5, 0.7, 0.9):
                val = adv_g_loss(const_map(s), mode).item()
                if prev is not None:
                    assert val < prev
                prev = val

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError):
            adv_g_loss(const_map(0.5), "hinge")


class TestCycleLoss:
    def test_zero_when_reconstruction_exact(self):
        g = torch.Generator().manual_seed(1)
        x = torch.rand((2, 3, 8, 8), generator=g)
        y = torch.rand((2, 3, 8, 8), generator=g)
        z = torch.rand((2, 1, 8, 8), generator=g)
        cx, cy, cz = cycle_loss(x, x, y, y, z, z)
        assert cx.item() == 0.0 and cy.item() == 0.0 and cz.item() == 0.0

    def test_constant_offset_gives_offset(self):
        x = const_map(0.2, (1, 3, 6, 6))
        cx, _, _ = cycle_loss(x, x + 0.1, x, x, x[:, :1], x[:, :1])
        assert abs(cx.item() - 0.1) < 1e-6

    def test_sign_flip_at_half(self):
        y = const_map(0.5, (1, 3, 4, 4))
        _, cy, _ = cycle_loss(y, y, y, -y, y[:, :1], y[:, :1])
        assert abs(cy.item() - 1.0) < 1e-6

    def test_shape_mismatch_rejected(self):
        a = const_map(0.0, (1, 3, 4, 4))
        b = const_map(0.0, (1, 3, 5, 5))
        with pytest.raises(ValueError):
            cycle_loss(a, b, a, a, a[:, :1], a[:, :1])

    def test_nonnegative(self):
        g = torch.Generator().manual_seed(2)
        x = torch.rand((1, 3, 4, 4), generator=g)
        r = torch.rand((1, 3, 4, 4), generator=g)
        cx, _, _ = cycle_loss(x, r, x, x, x[:, :1], x[:, :1])
        assert cx.item() >= 0.0


class TestTotalObjective:
    def test_cycle_free_total_is_adversarial_sum(self):
        t = total_objective(torch.tensor(0.3), torch.tensor(0.4), torch.tensor(0.5),
                            torch.tensor(0.0), torch.tensor(0.0), torch.tensor(0.0), 10.0)
        assert abs(t.item() - 1.2) < 1e-7

    def test_lambda_scales_cycle_linearly(self):
        args = tuple(torch.tensor(v, dtype=torch.float64)
                     for v in (0.1, 0.1, 0.1, 0.2, 0.3, 0.4))
        t1 = total_objective(*args, 10.0).item()
        t2 = total_objective(*args, 20.0).item()
        assert abs((t2 - 0.3) - 2 * (t1 - 0.3)) < 1e-6

    def test_default_lambda_is_ten(self):
        from demesh.training import TrainConfig
        assert TrainConfig().lam == 10.0


class TestLossReport:
    def _report(self):
        return LossReport.from_parts(3, 0.5, 0.6, 0.7, 0.2, 0.3, 0.4, 0.01, 0.02, 0.03, 10.0)

    def test_total_matches_invariant(self):
        r = self._report()
        assert abs(r.total_g - (0.9 + 10.0 * 0.06)) < 1e-9

    def test_json_round_trip(self):
        r = self._report()
        back = LossReport.from_json_line(r.to_json_line())
        assert back == r

    def test_json_uses_lambda_key(self):
        import json
        d = json.loads(self._report().to_json_line())
        assert d["lambda"] == 10.0 and "lam" not in d

    def test_finite_check(self):
        r = self._report()
        assert r.is_finite()
        bad = LossReport.from_parts(0, float("nan"), 0, 0, 0, 0, 0, 0, 0, 0, 10.0)
        assert not bad.is_finite()


class TestGradient:
    def test_total_objective_gradient_matches_finite_differences(self):
        # quick regression version; the acceptance suite runs the full
        # 200-sample sweep
        frac = run_total_objective_gradcheck(seed=0, n_samples=40)
        assert frac >= 0.95
