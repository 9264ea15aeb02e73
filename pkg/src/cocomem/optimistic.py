"""Optimistic delayed-FTRL learner for memory problems with untrusted
predictions, plus the epoch-doubling wrapper that tunes the penalty
parameter online.

The memory effect is recast as gradient delay through the forward
function

    Z_t(x_t) = sum_{i=0..m} [ f_{t+i}^i(x_t) + Phi'(V_{t+i-m-1}) g_{t+i}^{i,+}(x_t) ]

whose gradient is fully revealed only at the end of round t+m.  Each
round the learner assembles a hint for the still-missing window of
forward gradients by mixing revealed slices with predictor output, then
plays the regularized leader on revealed gradients plus hint, with the
regularization weight driven by past hint errors (the delayed
upper-bound sequence).  With memory-less constraints the constraint
slice sits at delay 0 and its multiplier uses the fresh violation
Phi'(V_{t-1}) instead of the delayed one.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .core import RoundRecord, Variant
from .geometry import Regularizer, ftrl_argmin, regret_coefficient
from .metrics import RunTrace
from .penalty import Penalty, PenaltyKind, lambda_optimistic

MAX_PATTERN_SLICES = 12


def huber(x: float, y: float) -> float:
    """0.5 x^2 - 0.5 (|x| - |y|)_+^2, the robust square that the DUB
    weights apply to hint errors."""
    hinge = max(abs(x) - abs(y), 0.0)
    return 0.5 * x * x - 0.5 * hinge * hinge


class OdafLearner:
    """One optimistic run (or one epoch of the doubling wrapper).

    `visibility_floor` zero-pads all slices of rounds before it, so a
    fresh epoch treats earlier rounds exactly like the pre-history of a
    cold start while the decision and violation paths carry over through
    the shared `x_hist` / `v_hist` maps.
    """

    def __init__(
        self,
        instance,
        variant: Variant,
        predictor,
        penalty: Penalty,
        alpha: float | None = None,
        first_round: int | None = None,
        visibility_floor: int | None = None,
        x_hist: dict | None = None,
        v_hist: dict | None = None,
    ):
        if penalty.kind is not PenaltyKind.EXPONENTIAL:
            raise ValueError("the optimistic learner uses the exponential penalty")
        if not hasattr(instance, "f_slice"):
            raise TypeError("optimistic learner needs a separable-slice instance")
        if variant is Variant.COCO_M and instance.constraint_memory:
            raise ValueError("memory-less-constraint variant needs constraint slices at delay 0")
        self.inst = instance
        self.variant = variant
        self.m = instance.m
        self.dim = instance.dim
        self.fset = instance.fset
        self.penalty = penalty
        self.predictor = predictor
        predictor.bind(instance)
        self.reg = Regularizer(self.fset)
        self.alpha = float(alpha) if alpha is not None else self.fset.diameter**2
        self.first = instance.first_round if first_round is None else first_round
        self.floor = self.first if visibility_floor is None else visibility_floor
        self.dual_delay = self.m + 1 if variant is Variant.COCO_M2 else 1

        self.x_hist = x_hist if x_hist is not None else {}
        self.v_hist = v_hist if v_hist is not None else {}
        for r in range(self.first - self.m - 1, self.first):
            self.x_hist.setdefault(r, self.fset.center)

        self._g_active: dict[tuple[int, int], bool] = {}
        self._forward: dict[int, np.ndarray] = {}
        self._rev_sum = np.zeros(self.dim)
        self._last_complete = self.first - self.m - 1  # newest assembled forward round
        self.hints: dict[int, np.ndarray] = {}
        self._hint_preds: dict[int, dict] = {}
        self._a: dict[int, float] = {}
        self._b: dict[int, float] = {}
        self._cum_sq = 0.0
        self._max_awin = 0.0
        self.mu_now = 0.0
        self.err_f = self.err_g = self.err_z = 0.0
        self.fixed_point_fallbacks = 0
        self.ccv = 0.0 if not self.v_hist else self.v_hist[max(self.v_hist)]

        # pre-step: commit the first decision from an all-predicted hint
        self._decide_next(self.first - 1)

    # -- slice access (epoch floor applied) --------------------------------

    def _f_slice(self, r: int, i: int):
        return None if r < self.floor else self.inst.f_slice(r, i)

    def _g_slice(self, r: int, i: int):
        return None if r < self.floor else self.inst.g_slice(r, i)

    # -- violation path -----------------------------------------------------

    def v_at(self, r: int) -> float:
        return self.v_hist.get(r, 0.0)

    def _mult(self, r: int) -> float:
        """Penalty weight of round r's constraint slice inside the forward
        function; prehistory reads V = 0."""
        return self.penalty.prime(self.v_at(r - self.dual_delay))

    # -- forward gradients ----------------------------------------------------

    def forward_gradient(self, s: int) -> np.ndarray:
        """grad Z_s, available once every slice (s+i, i) is revealed."""
        if s > self._last_complete:
            raise ValueError(f"forward gradient of round {s} is not revealed yet")
        return self._forward.get(s, np.zeros(self.dim))

    def _assemble_forward(self, s: int) -> np.ndarray:
        z = np.zeros(self.dim)
        for i in range(self.m + 1):
            fs = self._f_slice(s + i, i)
            if fs is not None:
                z += fs.coeff
            gs = self._g_slice(s + i, i)
            if gs is not None and self._g_active[(s + i, i)]:
                z += self._mult(s + i) * gs.coeff
        return z

    def _complete_round(self, s: int) -> None:
        z = self._assemble_forward(s)
        self._forward[s] = z
        self._rev_sum = self._rev_sum + z
        self._last_complete = s
        if s in self.hints:
            win = self._window_sum(s)
            err = float(np.linalg.norm(self.hints[s] - win))
            zn = float(np.linalg.norm(z))
            a = self.fset.diameter * min(err, zn)
            self._a[s] = a
            self._b[s] = huber(err, zn)
            self._cum_sq += a * a + 2.0 * self.alpha * self._b[s]

    def _window_sum(self, tau: int) -> np.ndarray:
        """sum_{j=tau-m}^{tau} grad Z_j over revealed rounds."""
        win = np.zeros(self.dim)
        for j in range(tau - self.m, tau + 1):
            if j in self._forward:
                win += self._forward[j]
        return win

    def _awin(self, j: int) -> float:
        return sum(self._a.get(i, 0.0) for i in range(j - self.m + 1, j + 1))

    def odaf_weights(self, t: int) -> tuple[float, float, float]:
        """(a_t-m, b_t-m, mu_{t+1}) per the delayed-upper-bound sequence;
        call after the round's forward gradient completed."""
        s = t - self.m
        mu = (2.0 / self.alpha) * self._max_awin + math.sqrt(self._cum_sq) / self.alpha
        return self._a.get(s, 0.0), self._b.get(s, 0.0), mu

    # -- prediction errors ----------------------------------------------------

    def prediction_errors(self, tau: int) -> tuple[float, float, float]:
        """(eps_Z, eps_f, eps_g) of hint h_tau, measurable once grad Z_tau
        is revealed (end of round tau+m)."""
        if tau not in self.hints:
            return 0.0, 0.0, 0.0
        if tau > self._last_complete:
            raise ValueError(f"hint {tau} error not measurable yet")
        win = self._window_sum(tau)
        eps_z = float(np.sum((self.hints[tau] - win) ** 2))
        df = np.zeros(self.dim)
        dg = np.zeros(self.dim)
        for (r, i), (f_pred, g_pred) in self._hint_preds[tau].items():
            fs = self._f_slice(r, i)
            df += f_pred - (fs.coeff if fs is not None else 0.0)
            gs = self._g_slice(r, i)
            g_true = gs.coeff if (gs is not None and self._g_active[(r, i)]) else 0.0
            dg += g_pred - g_true
        return eps_z, float(df @ df), float(dg @ dg)

    # -- hint assembly and the FTRL step ------------------------------------

    def _predict_pair(self, r: int, i: int, x_ref: np.ndarray):
        """Predictor output with the non-finite fallback applied."""
        f_pred = np.asarray(self.predictor.predict_f(r, i), dtype=float)
        if not np.all(np.isfinite(f_pred)):
            f_pred = np.zeros(self.dim)
        g_coef, active = self.predictor.predict_g(r, i, x_ref)
        g_coef = np.asarray(g_coef, dtype=float)
        if not np.all(np.isfinite(g_coef)):
            g_coef, active = np.zeros(self.dim), False
        return f_pred, g_coef, bool(active)

    def _pending_subtotal(self, s: int, t: int, preds: dict) -> np.ndarray:
        """Known-plus-predicted stand-in for grad Z_s, accumulated in the
        same slice order as `_assemble_forward` so perfect predictions
        reproduce the revealed gradient bitwise."""
        z = np.zeros(self.dim)
        x_s = self.x_hist[s]
        for i in range(self.m + 1):
            r = s + i
            if r <= t:
                fs = self._f_slice(r, i)
                if fs is not None:
                    z += fs.coeff
                gs = self._g_slice(r, i)
                if gs is not None and self._g_active[(r, i)]:
                    z += self._mult(r) * gs.coeff
            else:
                f_pred, g_coef, active = self._predict_pair(r, i, x_s)
                z += f_pred
                if active:
                    z += self._mult(r) * g_coef
                    preds[(r, i)] = (f_pred, g_coef)
                else:
                    preds[(r, i)] = (f_pred, np.zeros(self.dim))
        return z

    def _decide_next(self, t: int) -> None:
        """End-of-round-t work: assemble h_{t+1}, compute mu_{t+1}, and
        commit x_{t+1} (self-consistent activity for the pending round)."""
        m, nxt = self.m, t + 1
        self.predictor.begin_round(nxt)
        preds: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}
        # pending decisions s = t+1-m .. t: known slices plus predictions
        base = np.zeros(self.dim)
        for s in range(nxt - m, nxt):
            base = base + self._pending_subtotal(s, t, preds)
        # predicted forward gradient of the decision being committed
        block: list[tuple[np.ndarray, np.ndarray]] = []
        toggles = []
        for i in range(m + 1):
            r = nxt + i
            f_pred, g_coef, _ = self._predict_pair(r, i, self.x_hist[t])
            block.append((f_pred, g_coef))
            if float(np.linalg.norm(g_coef)) > 0.0:
                toggles.append((r, i, g_coef))

        _, _, mu = self.odaf_weights(t)
        self.mu_now = mu
        f_block = np.zeros(self.dim)
        for f_pred, _ in block:
            f_block += f_pred
        lin0 = self._rev_sum + base + f_block
        x_next, flags = self._resolve_pending_activity(lin0, mu, toggles, self.x_hist[t])
        on = {(r, i) for (r, i, _), flag in zip(toggles, flags) if flag}
        ztilde = np.zeros(self.dim)
        for i, (f_pred, g_coef) in enumerate(block):
            r = nxt + i
            ztilde += f_pred
            if (r, i) in on:
                ztilde += self._mult(r) * g_coef
                preds[(r, i)] = (f_pred, g_coef)
            else:
                preds[(r, i)] = (f_pred, np.zeros(self.dim))
        self.hints[nxt] = base + ztilde
        self._hint_preds[nxt] = preds
        self.x_hist[nxt] = x_next
        self._committed_mu = mu
        # fold the newest window sum into the lagged max AFTER mu used it
        s = t - self.m
        if s in self._a:
            self._max_awin = max(self._max_awin, self._awin(s))

    def _resolve_pending_activity(self, lin0: np.ndarray, mu: float, toggles,
                                  x_last: np.ndarray):
        """Search for an activity pattern of the pending round's constraint
        slices that reproduces itself at the decision it induces; falls
        back to judging activity at the last committed decision when no
        pattern is self-consistent."""
        if not toggles:
            return ftrl_argmin(self.fset, lin0, mu, self.reg), ()
        k = len(toggles)
        if k <= MAX_PATTERN_SLICES:
            for pattern in itertools.product((False, True), repeat=k):
                lin = lin0.copy()
                for (r, i, coef), on in zip(toggles, pattern):
                    if on:
                        lin += self._mult(r) * coef
                x = ftrl_argmin(self.fset, lin, mu, self.reg)
                realized = tuple(
                    self.predictor.predict_g(r, i, x)[1] for (r, i, _) in toggles
                )
                if realized == pattern:
                    return x, pattern
        self.fixed_point_fallbacks += 1
        flags = tuple(self.predictor.predict_g(r, i, x_last)[1] for (r, i, _) in toggles)
        lin = lin0.copy()
        for (r, i, coef), on in zip(toggles, flags):
            if on:
                lin += self._mult(r) * coef
        return ftrl_argmin(self.fset, lin, mu, self.reg), flags

    # -- one full round -------------------------------------------------------

    def play_round(self, t: int) -> RoundRecord:
        """Observe round t, settle the newly revealed forward gradient and
        hint error, and commit the next decision."""
        m = self.m
        x_t = self.x_hist[t]
        # register true slices and their activity at the decisions they touch
        f_mem = 0.0
        for i in range(m + 1):
            fs = self._f_slice(t, i)
            if fs is not None:
                f_mem += fs.value(self.x_hist[t - i])
            gs = self._g_slice(t, i)
            if gs is not None:
                self._g_active[(t, i)] = gs.value(self.x_hist[t - i]) > 0.0
        if self.variant is Variant.COCO_M2:
            g_val = 0.0
            for i in range(m + 1):
                gs = self._g_slice(t, i)
                if gs is not None:
                    g_val += gs.value(self.x_hist[t - i])
        else:
            gs = self._g_slice(t, 0)
            g_val = gs.value(x_t) if gs is not None else 0.0
        inc = max(g_val, 0.0)
        self.ccv += inc
        self.v_hist[t] = self.ccv

        eps_z = eps_f = eps_g = 0.0
        s = t - m
        if s >= 1:
            self._complete_round(s)
            if s in self.hints:
                eps_z, eps_f, eps_g = self.prediction_errors(s)
                self.err_z += eps_z
                self.err_f += eps_f
                self.err_g += eps_g

        self._decide_next(t)

        f_spl = float(sum(fs.value(x_t) for i in range(m + 1)
                          if (fs := self._f_slice(t, i)) is not None))
        g_spl = float(sum(gs.value(x_t) for i in range(m + 1)
                          if (gs := self._g_slice(t, i)) is not None))
        mult_t = self._mult(t)
        return RoundRecord(
            t=t,
            x=np.asarray(x_t, dtype=float).copy(),
            f_mem=f_mem,
            f_splat=f_spl,
            g_mem=g_val,
            g_splat=g_spl,
            g_plus_recorded=inc,
            v_dual=self.ccv,
            ccv_cum=self.ccv,
            phi_prime=mult_t,
            lam=self.penalty.lam,
            surrogate=f_mem + mult_t * inc,
            grad_norm=float(np.linalg.norm(self._forward.get(s, np.zeros(self.dim)))),
            eta_or_mu=self._committed_mu,
            eps_f=eps_f,
            eps_g=eps_g,
            eps_z=eps_z,
            saturated=self.penalty.saturates(self.ccv),
        )


def run_optimistic(
    instance,
    variant: Variant,
    predictor,
    lam: float | None = None,
    error_estimate: float = 0.0,
    alpha: float | None = None,
) -> RunTrace:
    """Drive one optimistic run; lam defaults to the theorem tuning with
    the supplied estimate of the cumulative constraint prediction error."""
    alpha_val = float(alpha) if alpha is not None else instance.fset.diameter**2
    if lam is None:
        k = instance.constants()
        coeff = regret_coefficient(instance.fset, instance.m, alpha_val)
        eff_m = instance.m if variant is Variant.COCO_M2 else 0
        lam = lambda_optimistic(error_estimate, k.g_bound, eff_m, coeff)
    learner = OdafLearner(instance, variant, predictor, Penalty(PenaltyKind.EXPONENTIAL, lam),
                          alpha=alpha_val)
    records = [learner.play_round(t) for t in range(instance.first_round, instance.horizon + 1)]
    return RunTrace(
        algorithm="odaf",
        variant=variant,
        penalty_kind=PenaltyKind.EXPONENTIAL,
        records=records,
        instance=instance,
        first_round=instance.first_round,
        extras={
            "lambda_value": lam,
            "alpha": alpha_val,
            "hints": dict(learner.hints),
            "error_sums": {"z": learner.err_z, "f": learner.err_f, "g": learner.err_g},
            "fixed_point_fallbacks": learner.fixed_point_fallbacks,
            "predictor": predictor.kind,
        },
    )


# ---------------------------------------------------------------------------
# Doubling trick


class DoublingSchedule:
    """Epoch bookkeeping of the online penalty tuning.

    The complexity estimate is psi(Delta, E) = C sqrt(E); whenever the
    per-epoch estimate exceeds the current budget the budget doubles and
    the epoch restarts with lam = 1 / (2 (budget + c)).
    """

    def __init__(self, regret_coeff: float, offset: float, mu1: float):
        if mu1 <= 0:
            raise ValueError("initial budget must be positive")
        self.coeff = regret_coeff
        self.offset = offset
        self.mu1 = mu1
        self.epoch = 1
        self.budget = mu1
        self.rounds_in_epoch = 0
        self.error_in_epoch = 0.0
        self.epoch_starts: list[int] = []

    def psi(self, rounds: int, error: float) -> float:
        return self.coeff * math.sqrt(max(error, 0.0))

    @property
    def lam(self) -> float:
        return 1.0 / (2.0 * (self.budget + self.offset))

    @property
    def empirical(self) -> float:
        return self.psi(self.rounds_in_epoch, self.error_in_epoch)

    def should_restart(self) -> bool:
        return self.empirical > self.budget

    def restart(self) -> None:
        self.epoch += 1
        self.budget = 2.0 ** (self.epoch - 1) * self.mu1
        self.rounds_in_epoch = 0
        self.error_in_epoch = 0.0

    def observe(self, eps_g: float) -> None:
        self.rounds_in_epoch += 1
        self.error_in_epoch += eps_g


def doubling_mu1(regret_coeff: float, initial_rounds: int, initial_error: float) -> float:
    """Initial complexity budget; floored at a machine-epsilon scale so a
    zero estimate cannot trigger an unbounded restart cascade."""
    floor = 64.0 * np.finfo(float).eps * max(1.0, regret_coeff)
    return max(regret_coeff * math.sqrt(max(initial_error, 0.0)), floor)


class DoublingLearner:
    """Optimistic learner with online penalty tuning (one inner learner per
    epoch; decisions and the violation path persist across restarts, the
    gradient memory and hint-error statistics start fresh)."""

    def __init__(self, instance, variant: Variant, predictor,
                 alpha: float | None = None,
                 initial_rounds: int | None = None, initial_error: float = 0.0):
        self.inst = instance
        self.variant = variant
        self.predictor = predictor
        self.alpha = float(alpha) if alpha is not None else instance.fset.diameter**2
        k = instance.constants()
        coeff = regret_coefficient(instance.fset, instance.m, self.alpha)
        offset = k.g_bound * ((instance.m + 1) if variant is Variant.COCO_M2 else 1)
        t1 = (instance.m + 1) if initial_rounds is None else initial_rounds
        self.schedule = DoublingSchedule(coeff, offset, doubling_mu1(coeff, t1, initial_error))
        self.x_hist: dict = {}
        self.v_hist: dict = {}
        self._spawn(instance.first_round)

    def _spawn(self, start_round: int) -> None:
        self.schedule.epoch_starts.append(start_round)
        self.inner = OdafLearner(
            self.inst,
            self.variant,
            self.predictor,
            Penalty(PenaltyKind.EXPONENTIAL, self.schedule.lam),
            alpha=self.alpha,
            first_round=start_round,
            visibility_floor=start_round,
            x_hist=self.x_hist,
            v_hist=self.v_hist,
        )

    def play_round(self, t: int) -> RoundRecord:
        if self.schedule.should_restart():
            self.schedule.restart()
            self._spawn(t)
        rec = self.inner.play_round(t)
        self.schedule.observe(rec.eps_g)
        return rec


def run_doubling(
    instance,
    variant: Variant,
    predictor,
    alpha: float | None = None,
    initial_rounds: int | None = None,
    initial_error: float = 0.0,
) -> RunTrace:
    learner = DoublingLearner(instance, variant, predictor, alpha=alpha,
                              initial_rounds=initial_rounds, initial_error=initial_error)
    records = [learner.play_round(t) for t in range(instance.first_round, instance.horizon + 1)]
    sched = learner.schedule
    return RunTrace(
        algorithm="odaf_doubling",
        variant=variant,
        penalty_kind=PenaltyKind.EXPONENTIAL,
        records=records,
        instance=instance,
        first_round=instance.first_round,
        extras={
            "lambda_value": sched.lam,
            "alpha": learner.alpha,
            "epochs": sched.epoch,
            "epoch_starts": list(sched.epoch_starts),
            "mu1": sched.mu1,
            "mu_final": sched.budget,
            "error_sums": {
                "z": float(sum(r.eps_z for r in records)),
                "f": float(sum(r.eps_f for r in records)),
                "g": float(sum(r.eps_g for r in records)),
            },
            "predictor": predictor.kind,
        },
    )
