"""Randomised identity suite behind the `verify` sub-command.

Checks, on seeded random instances:

* exactness: W0 + W_res + (sum w B)(sum w A) equals the dense weighted target;
* the pairwise-difference residual equals the direct residual;
* identical client adapters give a zero residual, and a heterogeneous pair
  does not;
* reverse-mode gradients of the primitives and of the tiny transformer
  agree with central finite differences.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Sequence

import numpy as np

from .. import numkit
from ..aggregate import (
    ClientUpdate,
    aggregate_factors,
    dense_aggregate_oracle,
    residual_weight,
    residual_weight_pairwise,
)
from ..config import EXACTNESS_TOL, NULL_RESIDUAL_TOL
from ..lora import LoraAdapter, PlacementSpec
from ..model import ModelConfig, attach_adapters, compute_loss, forward, init_backbone, to_full_finetune
from ..numkit import Tensor, check_gradients, ordered_matmul
from ..utils import rng_utils

logger = logging.getLogger(__name__)

GRADIENT_TOL = 1e-4
SCALAR_GRADIENT_TOL = 1e-5
MIN_HETEROGENEOUS_RESIDUAL = 1e-6

ResidualFn = Callable[[Sequence[ClientUpdate], Sequence[float]], Dict[str, Tensor]]


@dataclass
class IdentityCheck:
    """Outcome of one identity over all its trials."""
    name: str
    trials: int
    worst: float
    tolerance: float
    passed: bool

    def row(self) -> List:
        return [self.name, self.trials, f"{self.worst:.3e}", f"{self.tolerance:.0e}",
                "PASS" if self.passed else "FAIL"]


def faulty_residual(updates: Sequence[ClientUpdate], weights: Sequence[float]) -> Dict[str, Tensor]:
    """Residual with the sign of the factor-product term flipped (negative control)."""
    factors = aggregate_factors(updates, weights)
    correct = residual_weight(updates, weights)
    return {
        name: Tensor(correct[name].data + 2.0 * ordered_matmul(f.B.data, f.A.data))
        for name, f in factors.items()
    }


def _random_instance(rng: np.random.Generator, max_k: int):
    K = int(rng.integers(1, max_k + 1))
    d, k = int(rng.integers(2, 33)), int(rng.integers(2, 33))
    r = int(rng.integers(1, min(d, k) + 1))
    weights = rng.dirichlet(np.ones(K)).tolist()
    updates = [
        ClientUpdate(client_id=i, num_samples=1, factors={
            "W": LoraAdapter(B=Tensor(rng.normal(size=(d, r))), A=Tensor(rng.normal(size=(r, k))))
        })
        for i in range(K)
    ]
    return Tensor(rng.normal(size=(d, k))), updates, weights


def _check(name: str, errors: List[float], tolerance: float, above: bool = False) -> IdentityCheck:
    worst = min(errors) if above else max(errors)
    passed = worst > tolerance if above else worst < tolerance
    return IdentityCheck(name, len(errors), worst, tolerance, passed)


def aggregation_checks(trials: int, max_k: int, seed: int,
                       residual_fn: ResidualFn = residual_weight) -> List[IdentityCheck]:
    exact, forms, null = [], [], []
    for trial in range(trials):
        rng = rng_utils.stream(seed, rng_utils.VERIFY, trial)
        W0, updates, weights = _random_instance(rng, max_k)
        w_res = residual_fn(updates, weights)["W"]
        factors = aggregate_factors(updates, weights)["W"]
        rebuilt = W0.data + w_res.data + ordered_matmul(factors.B.data, factors.A.data)
        oracle = dense_aggregate_oracle(W0, updates, weights, "W").data
        exact.append(float(np.max(np.abs(rebuilt - oracle))))
        pairwise = residual_weight_pairwise(updates, weights)["W"]
        forms.append(float(np.max(np.abs(w_res.data - pairwise.data))))

        same = [ClientUpdate(client_id=i, num_samples=1, factors={"W": updates[0].factors["W"]})
                for i in range(len(updates))]
        null.append(float(np.max(np.abs(residual_fn(same, weights)["W"].data))))

    rng = rng_utils.stream(seed, rng_utils.VERIFY, trials)
    pair = [ClientUpdate(client_id=i, num_samples=1, factors={
        "W": LoraAdapter(B=Tensor(rng.normal(size=(4, 2))), A=Tensor(rng.normal(size=(2, 4))))
    }) for i in range(2)]
    heterogeneous = float(np.linalg.norm(residual_fn(pair, [0.5, 0.5])["W"].data))

    return [
        _check("reswu exactness", exact, EXACTNESS_TOL),
        _check("pairwise form", forms, EXACTNESS_TOL),
        _check("identical-adapter null", null, NULL_RESIDUAL_TOL),
        _check("heterogeneous residual", [heterogeneous], MIN_HETEROGENEOUS_RESIDUAL, above=True),
    ]


def _leaf(rng: np.random.Generator, shape, name: str) -> Tensor:
    return Tensor(rng.uniform(-1.0, 1.0, size=shape), requires_grad=True, name=name)


def _op_gradient_errors(rng: np.random.Generator) -> Dict[str, float]:
    errors: Dict[str, float] = {}
    a, b = _leaf(rng, (3, 4), "a"), _leaf(rng, (4, 2), "b")
    errors.update({f"matmul.{k}": v for k, v in check_gradients(
        lambda: numkit.ops.sum(numkit.gelu(numkit.matmul(a, b))), [a, b]).items()})
    x, gain, bias = _leaf(rng, (3, 5), "x"), _leaf(rng, (5,), "gain"), _leaf(rng, (5,), "bias")
    errors.update({f"layer_norm.{k}": v for k, v in check_gradients(
        lambda: numkit.ops.sum(numkit.gelu(numkit.layer_norm(x, gain, bias))), [x, gain, bias]).items()})
    q, k, v = _leaf(rng, (4, 3), "q"), _leaf(rng, (4, 3), "k"), _leaf(rng, (4, 3), "v")
    errors.update({f"attention.{n}": e for n, e in check_gradients(
        lambda: numkit.ops.sum(numkit.gelu(numkit.attention(q, k, v, 2))), [q, k, v]).items()})
    return errors


def _scalar_gradient_errors(rng: np.random.Generator) -> Dict[str, float]:
    logits = _leaf(rng, (3, 4), "logits")
    labels = rng.integers(0, 4, size=3)
    errors = {f"cross_entropy.{k}": e for k, e in check_gradients(
        lambda: numkit.softmax_cross_entropy(logits, labels), [logits]).items()}
    errors.update({f"mse.{k}": e for k, e in check_gradients(
        lambda: numkit.mse_loss(logits, labels), [logits]).items()})
    return errors


def _model_gradient_errors(rng: np.random.Generator, seed: int) -> Dict[str, float]:
    config = ModelConfig(input_dim=4, num_classes=3, depth=2, dim=4, ffn_dim=6, num_tokens=2)
    batch = Tensor(rng.uniform(-1.0, 1.0, size=(3, 4)))
    labels = rng.integers(0, 3, size=3)

    adapted = attach_adapters(init_backbone(config, seed), PlacementSpec(blocks="all"), 2, seed, std=0.5)
    for adapter in adapted.adapters.values():
        adapter.B._assign(rng.uniform(-0.5, 0.5, size=adapter.B.shape))
    errors = {f"lora.{k}": e for k, e in check_gradients(
        lambda: compute_loss(forward(adapted, batch), labels, "cross_entropy"),
        adapted.trainable_parameters()).items()}

    full = to_full_finetune(init_backbone(config, seed))
    errors.update({f"full.{k}": e for k, e in check_gradients(
        lambda: compute_loss(forward(full, batch), labels, "cross_entropy"),
        full.trainable_parameters()).items()})
    return errors


def gradient_checks(trials: int, seed: int) -> List[IdentityCheck]:
    ops, scalars, model = [], [], []
    for trial in range(trials):
        rng = rng_utils.stream(seed, rng_utils.VERIFY, 10_000 + trial)
        ops.append(max(_op_gradient_errors(rng).values()))
        scalars.append(max(_scalar_gradient_errors(rng).values()))
        model.append(max(_model_gradient_errors(rng, seed + trial).values()))
    return [
        _check("op gradients", ops, GRADIENT_TOL),
        _check("loss gradients", scalars, SCALAR_GRADIENT_TOL),
        _check("transformer gradients", model, GRADIENT_TOL),
    ]


def run_identity_suite(trials: int = 500, max_k: int = 16, seed: int = 0, gradient_trials: int = 3,
                       inject_fault: bool = False) -> List[IdentityCheck]:
    """Run every identity; `inject_fault` swaps in a sign-flipped residual."""
    residual_fn = faulty_residual if inject_fault else residual_weight
    if inject_fault:
        logger.warning("Fault injection active: residual product term has its sign flipped")
    checks = aggregation_checks(trials, max_k, seed, residual_fn)
    checks += gradient_checks(gradient_trials, seed)
    for check in checks:
        if not check.passed:
            logger.error(f"Identity '{check.name}' failed: worst {check.worst:.3e} vs {check.tolerance:.0e}")
    return checks
