"""Command-line front end: config ingestion, pipeline orchestration with
on-disk caching of the pairing and GL stages, and report emission."""

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import bdg_lattice as bdg
from . import gl as glmod
from . import model as modelmod
from . import ti_bcs
from .errors import BcsglError, ConfigError, StaleCacheError, SolverError
from .gl import GLField, GLCoefficients, GLSpectralResult
from .report import ReportRecord, SCHEMA_VERSION, config_digest, write_csv
from .ti_bcs import PairingData

COMMANDS = ("validate", "tc", "pairing", "coeffs", "dc", "predict",
            "verify-semiclassics", "verify-identity", "verify-klein",
            "verify-alpha-delta", "verify-witness", "pipeline")

VERIFY_H = {"semiclassics": (0.2, 0.1, 0.05, 0.025),
            "alpha-delta": (0.2, 0.1, 0.05),
            "witness": (0.2, 0.1, 0.05)}


class _Ctx:
    """Shared stage state: config, digest, cache directory, resolution."""

    def __init__(self, config_path, out_dir, seed=None, grid_scale=1.0,
                 timings=False):
        self.config_path = Path(config_path)
        with open(self.config_path) as fh:
            self.raw = json.load(fh)
        self.config = modelmod.config_from_dict(self.raw)
        if seed is not None:
            self.config.seed = seed
        self.digest = config_digest(self.raw)
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.cache_dir = self.out / "cache"
        self.scale = grid_scale
        self.timings = timings
        self._t0 = time.perf_counter()

    def record(self, command, outputs, residuals=None, inputs=None) -> ReportRecord:
        rec = ReportRecord(
            command=command, config_digest=self.digest,
            inputs=inputs or {"config": str(self.config_path),
                              "grid_scale": self.scale,
                              "seed": self.config.seed},
            outputs=outputs, residuals=residuals or {},
        )
        if self.timings:
            rec.timings = {"wall_s": time.perf_counter() - self._t0}
        return rec

    # -- caching ---------------------------------------------------------

    def _cache_path(self, stage) -> Path:
        return self.cache_dir / f"{stage}.json"

    def load_cache(self, stage):
        path = self._cache_path(stage)
        if not path.exists():
            return None
        data = json.loads(path.read_text())
        if data.get("config_digest") != self.digest or \
           data.get("schema_version") != SCHEMA_VERSION or \
           data.get("grid_scale") != self.scale:
            raise StaleCacheError(
                f"cache file {path} does not match the current config/scale; "
                "delete it to recompute")
        return data["payload"]

    def save_cache(self, stage, payload):
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        self._cache_path(stage).write_text(json.dumps({
            "config_digest": self.digest,
            "schema_version": SCHEMA_VERSION,
            "grid_scale": self.scale,
            "payload": payload,
        }))


# ---------------------------------------------------------------------------
# stages

def stage_validate(ctx: _Ctx):
    report = modelmod.validate(ctx.config)
    return report, report.as_dict()


def stage_tc(ctx: _Ctx, use_cache=True):
    cached = ctx.load_cache("tc") if use_cache else None
    if cached is not None:
        return cached, True
    grid = ti_bcs.default_position_grid(ctx.config, ctx.scale)
    res = ti_bcs.find_Tc(ctx.config, grid)
    payload = {"Tc": res["Tc"], "L": grid.L, "N": grid.N,
               "n_evaluations": len(res["evaluations"])}
    if use_cache:
        ctx.save_cache("tc", payload)
    return payload, False


def stage_pairing(ctx: _Ctx, use_cache=True):
    fresh_upstream = False
    tc_payload, from_cache = stage_tc(ctx, use_cache)
    fresh_upstream = not from_cache
    cached = ctx.load_cache("pairing") if (use_cache and not fresh_upstream) else None
    if cached is not None:
        return _pairing_from_payload(ctx, cached), cached, True
    grid = ti_bcs.default_position_grid(ctx.config, ctx.scale)
    pairing = ti_bcs.compute_pairing(ctx.config, grid, Tc=tc_payload["Tc"])
    payload = {
        "Tc": pairing.Tc, "beta_c": pairing.beta_c,
        "simplicity_gap": pairing.simplicity_gap,
        "L": grid.L, "N": grid.N, "mu": pairing.mu,
        "alpha_star": pairing.alpha_star.ravel().tolist(),
    }
    if use_cache:
        ctx.save_cache("pairing", payload)
    return pairing, payload, False


def _pairing_from_payload(ctx: _Ctx, payload) -> PairingData:
    from .grids import PositionGrid
    grid = PositionGrid(ctx.config.d, payload["L"], payload["N"])
    alpha = np.asarray(payload["alpha_star"])
    if ctx.config.d > 1:
        alpha = alpha.reshape((payload["N"],) * ctx.config.d)
    pts = grid.points()
    weights = ctx.config.V(pts) * alpha.ravel() * grid.dx ** grid.d
    pairing = PairingData(
        Tc=payload["Tc"], beta_c=payload["beta_c"], alpha_star=alpha,
        t_star_samples=None, simplicity_gap=payload["simplicity_gap"],
        grid=grid, mu=payload["mu"], _weights=weights)
    pmesh = grid.momentum_mesh()
    if grid.d == 1:
        pairing.t_star_samples = pairing.t_star(pmesh[0])
    else:
        pq = np.stack([p.ravel() for p in pmesh], axis=-1)
        pairing.t_star_samples = pairing.t_star(pq).reshape(pmesh[0].shape)
    return pairing


def stage_coeffs(ctx: _Ctx, use_cache=True):
    pairing, _, pairing_cached = stage_pairing(ctx, use_cache)
    cached = ctx.load_cache("coeffs") if (use_cache and pairing_cached) else None
    if cached is not None:
        return pairing, _coeffs_from_payload(cached), cached, True
    coeffs = glmod.compute_gl_coefficients(pairing, ctx.config.mu, ctx.config.d)
    payload = coeffs.as_dict()
    if use_cache:
        ctx.save_cache("coeffs", payload)
    return pairing, coeffs, payload, False


def _coeffs_from_payload(payload) -> GLCoefficients:
    return GLCoefficients(
        Lambda0=np.asarray(payload["Lambda0"]), Lambda1=payload["Lambda1"],
        Lambda2=payload["Lambda2"], Lambda3=payload["Lambda3"],
        beta_c=payload["beta_c"],
        quadrature_error_estimate=payload["quadrature_error_estimate"])


def _gl_cutoff(ctx: _Ctx) -> int:
    M = ctx.config.numerics.get("gl_cutoff",
                                glmod.DEFAULT_GL_CUTOFF[ctx.config.d])
    return max(int(round(M * ctx.scale)), 2 * ctx.config.fields.max_mode() + 1)


def stage_dc(ctx: _Ctx, use_cache=True):
    pairing, coeffs, _, coeffs_cached = stage_coeffs(ctx, use_cache)
    cached = ctx.load_cache("dc") if (use_cache and coeffs_cached) else None
    if cached is not None:
        return pairing, coeffs, _spectral_from_payload(ctx, cached), cached, True
    M = _gl_cutoff(ctx)
    spectral = glmod.compute_Dc(coeffs, ctx.config.fields, M)
    payload = {
        "Dc": spectral.Dc, "eigen_gap": spectral.eigen_gap,
        "basis_cutoff": spectral.basis_cutoff,
        "cutoff_doubling_delta": spectral.cutoff_doubling_delta,
        "psi_star_norm4_4": spectral.psi_star_norm4_4,
        "psi_star_re": spectral.psi_star.coeffs.real.ravel().tolist(),
        "psi_star_im": spectral.psi_star.coeffs.imag.ravel().tolist(),
    }
    if use_cache:
        ctx.save_cache("dc", payload)
    return pairing, coeffs, spectral, payload, False


def _spectral_from_payload(ctx: _Ctx, payload) -> GLSpectralResult:
    M = payload["basis_cutoff"]
    shape = (2 * M + 1,) * ctx.config.d
    coeffs = (np.asarray(payload["psi_star_re"]) +
              1j * np.asarray(payload["psi_star_im"])).reshape(shape)
    return GLSpectralResult(
        Dc=payload["Dc"], psi_star=GLField(ctx.config.d, M, coeffs),
        eigen_gap=payload["eigen_gap"], basis_cutoff=M,
        cutoff_doubling_delta=payload["cutoff_doubling_delta"],
        psi_star_norm4_4=payload["psi_star_norm4_4"])


# ---------------------------------------------------------------------------
# verify commands

def _verify_semiclassics(ctx: _Ctx):
    pairing, *_ = stage_pairing(ctx, use_cache=False)
    quad = glmod.MomentumQuadrature(pairing, ctx.config.mu, 1)
    psi = GLField.from_modes({(1,): 1.0}, 2, 1)
    rows = []
    for h in VERIFY_H["semiclassics"]:
        grid = bdg.default_torus_grid(ctx.config, h=h, scale=ctx.scale)
        rec = bdg.semiclassical_residual(psi, pairing, h, pairing.beta_c,
                                         ctx.config.fields, grid, quad)
        rows.append((h, abs(rec["residual"]), rec["lhs"], rec["E1_term"],
                     rec["E2_term"]))
    hs = np.array([r[0] for r in rows])
    res = np.array([r[1] for r in rows])
    slope = float(np.polyfit(np.log(hs), np.log(res), 1)[0])
    write_csv(ctx.out / "verify-semiclassics.csv",
              ["h", "abs_residual", "lhs", "E1_term", "E2_term"], rows)
    return {"slope": slope, "points": [list(r) for r in rows]}, \
           {"min_acceptable_slope": 4.5}


def _verify_identity(ctx: _Ctx, n_instances=20):
    # N <= 64 requires h >= 1/8 for the microscale rule; draw h per instance
    rng = np.random.default_rng(ctx.config.seed + 11)
    rows = []
    for i in range(n_instances):
        h = float(rng.uniform(0.15, 0.4))
        N = int(np.ceil(8.0 / h / 2) * 2)
        grid = bdg.TorusGrid(min(ctx.config.d, 2), N, h)
        h_op = bdg.assemble_h(h, ctx.config.mu, ctx.config.fields, grid)
        vk = bdg.interaction_kernel(ctx.config, grid, h)
        delta = _random_symmetric_delta(rng, grid)
        beta = 1.0 / (0.5 + rng.random())
        if i % 2 == 0:
            gamma_state = bdg.gibbs_state(bdg.assemble_HDelta(h_op, delta), beta)
        else:
            other = _random_symmetric_delta(rng, grid)
            gamma_state = bdg.gibbs_state(bdg.assemble_HDelta(h_op, other), beta)
        r = bdg.key_identity_residual(gamma_state, delta, 1.0 / beta,
                                      ctx.config, grid, h, h_op=h_op, vkernel=vk)
        rows.append((i, r))
    write_csv(ctx.out / "verify-identity.csv", ["instance", "residual"], rows)
    worst = max(r for _, r in rows)
    return {"instances": n_instances, "max_residual": worst}, \
           {"tolerance": 1e-10}


def _random_symmetric_delta(rng, grid):
    n = grid.n_modes
    neg = bdg._neg_index(grid)
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    A = 0.25 * (A + A[np.ix_(neg, neg)].T)   # kernel symmetry in mode basis
    return bdg.LatticeOperator(A, "mode", False, grid)


def _verify_klein(ctx: _Ctx, n_instances=100):
    rng = np.random.default_rng(ctx.config.seed + 13)
    rows = []
    for i in range(n_instances):
        n = int(rng.integers(4, 17))
        blocks = []
        for _ in range(2):
            B = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
            blocks.append(B + B.conj().T)
        H0 = np.block([[blocks[0], np.zeros((n, n))],
                       [np.zeros((n, n)), blocks[1]]])
        X = rng.normal(size=(2 * n, 2 * n)) + 1j * rng.normal(size=(2 * n, 2 * n))
        X = X + X.conj().T
        w, V = np.linalg.eigh(X)
        G = (V * rng.random(2 * n)) @ V.conj().T
        rows.append((i, bdg.klein_gap(G, H0)))
    write_csv(ctx.out / "verify-klein.csv", ["instance", "gap"], rows)
    return {"instances": n_instances, "min_gap": min(g for _, g in rows)}, \
           {"tolerance": -1e-12}


def _verify_alpha_delta(ctx: _Ctx):
    pairing, *_ = stage_pairing(ctx, use_cache=False)
    psi = GLField.from_modes({(1,): 1.0}, 2, 1)
    rows = []
    for h in VERIFY_H["alpha-delta"]:
        grid = bdg.default_torus_grid(ctx.config, h=h, scale=ctx.scale)
        rec = bdg.alpha_delta_deviation(psi, pairing, h, pairing.beta_c,
                                        ctx.config.fields, grid)
        rows.append((h, rec["h1_norm_dev"], rec["h1_norm_lead"]))
    hs = np.array([r[0] for r in rows])
    dev = np.array([r[1] for r in rows])
    slope = float(np.polyfit(np.log(hs), np.log(dev), 1)[0])
    write_csv(ctx.out / "verify-alpha-delta.csv",
              ["h", "h1_norm_dev", "h1_norm_lead"], rows)
    return {"slope": slope, "points": [list(r) for r in rows]}, \
           {"min_acceptable_slope": 2.3}


def _verify_witness(ctx: _Ctx):
    pairing, coeffs, spectral, *_ = stage_dc(ctx, use_cache=False)
    rows = []
    for h in VERIFY_H["witness"]:
        rec = bdg.trial_state_tc_witness(h, pairing, coeffs, spectral,
                                         ctx.config)
        rows.append((h, rec["normalized_shift"], rec["T_witness"], rec["flag"]))
    write_csv(ctx.out / "verify-witness.csv",
              ["h", "normalized_shift", "T_witness", "flag"], rows)
    errs = [abs(r[1] - spectral.Dc) for r in rows]
    return {"Dc": spectral.Dc, "points": [list(r) for r in rows],
            "shift_errors": errs}, {}


# ---------------------------------------------------------------------------
# driver

def run(command: str, config_path, out_dir, seed=None, grid_scale=1.0,
        timings=False):
    """Execute one command; returns (exit_code, ReportRecord|None)."""
    try:
        ctx = _Ctx(config_path, out_dir, seed, grid_scale, timings)
    except (ConfigError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2, None
    try:
        if command == "validate":
            report, payload = stage_validate(ctx)
            rec = ctx.record("validate", payload)
            rec.write(ctx.out / "validate.json")
            if not report.passed:
                failed = [c.name for c in report.checks if not c.passed]
                print(f"validation failed: {failed}", file=sys.stderr)
                return 2, rec
            return 0, rec
        if command == "tc":
            payload, _ = stage_tc(ctx)
            rec = ctx.record("tc", payload)
            rec.write(ctx.out / "tc.json")
            return 0, rec
        if command == "pairing":
            pairing, payload, _ = stage_pairing(ctx)
            out = dict(payload)
            rec = ctx.record("pairing", out)
            rec.write(ctx.out / "pairing.json")
            return 0, rec
        if command == "coeffs":
            _, coeffs, payload, _ = stage_coeffs(ctx)
            rec = ctx.record("coeffs", payload,
                             residuals={"quadrature_error_estimate":
                                        coeffs.quadrature_error_estimate})
            rec.write(ctx.out / "coeffs.json")
            return 0, rec
        if command == "dc":
            _, _, spectral, payload, _ = stage_dc(ctx)
            out = {k: payload[k] for k in
                   ("Dc", "eigen_gap", "basis_cutoff", "cutoff_doubling_delta",
                    "psi_star_norm4_4")}
            rec = ctx.record("dc", out,
                             residuals={"cutoff_doubling_delta":
                                        payload["cutoff_doubling_delta"]})
            rec.write(ctx.out / "dc.json")
            return 0, rec
        if command == "predict":
            pairing, coeffs, spectral, payload, _ = stage_dc(ctx)
            out = glmod.predict_critical_temperature(
                ctx.config.h, pairing.Tc, spectral.Dc, ctx.config.d)
            rec = ctx.record("predict", out)
            rec.write(ctx.out / "predict.json")
            return 0, rec
        if command == "pipeline":
            report, vpayload = stage_validate(ctx)
            if not report.passed:
                ctx.record("validate", vpayload).write(ctx.out / "validate.json")
                return 2, None
            pairing, coeffs, spectral, dcp, _ = stage_dc(ctx)
            pred = glmod.predict_critical_temperature(
                ctx.config.h, pairing.Tc, spectral.Dc, ctx.config.d)
            out = {"validate": vpayload, "Tc": pairing.Tc,
                   "Dc": spectral.Dc, "predict": pred}
            rec = ctx.record("pipeline", out)
            rec.write(ctx.out / "pipeline.json")
            return 0, rec
        if command.startswith("verify-"):
            name = command[len("verify-"):]
            fn = {"semiclassics": _verify_semiclassics,
                  "identity": _verify_identity,
                  "klein": _verify_klein,
                  "alpha-delta": _verify_alpha_delta,
                  "witness": _verify_witness}.get(name)
            if fn is None:
                print(f"unknown command {command}", file=sys.stderr)
                return 2, None
            outputs, residuals = fn(ctx)
            rec = ctx.record(command, outputs, residuals)
            rec.write(ctx.out / f"{command}.json")
            return 0, rec
        print(f"unknown command {command}", file=sys.stderr)
        return 2, None
    except (ConfigError, StaleCacheError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2, None
    except BcsglError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3, None


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="bcsgl",
        description="BCS critical temperature, GL coefficients and the "
                    "field-induced shift on discrete-torus BdG models")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON config path")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--grid-scale", type=float, default=1.0,
                        help="multiply default resolutions (convergence studies)")
    parser.add_argument("--timings", action="store_true",
                        help="include wall-clock timings in reports "
                             "(breaks byte-reproducibility)")
    args = parser.parse_args(argv)
    code, _ = run(args.command, args.config, args.out, args.seed,
                  args.grid_scale, args.timings)
    return code


if __name__ == "__main__":
    sys.exit(main())
