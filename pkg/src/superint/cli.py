"""Command-line entry point.

    superint list
    superint simulate  --potential aniso-9-1 --state '[0.3,0.1,0.2,-0.4]' --dt 1e-4 --steps 100000 --out traj.csv
    superint orbit     --potential aniso-9-1 --state '[0.3,0.1,0.2,-0.4]' --out orbit.csv
    superint certify   --potential rational-1 --params '{"a":"i","a0":1.0}' --hbar 1
    superint spectrum  --potential rational-1 --params '{"a":"i","a0":1.0,"hbar":1.0}' --p-max 10
    superint schrodinger --potential rational-1 --params '{"a":"i","a0":1.0}' --cutoff 8
    superint specialfn --params '{"function":"jacobi","k":0.8}' --L 4 --N 200

Options may also come from a JSON file (``--config run.json``); flags win.
Exit status is 0 on success, 2 for invalid input and 3 for numerical
failures; errors are a single JSON line on stderr.
"""

import argparse
import csv
import io
import json
import os
import sys
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator
from pydantic import ValidationError as PydanticError

COMMANDS = ("list", "simulate", "certify", "orbit", "spectrum", "schrodinger", "specialfn")
NEEDS_POTENTIAL = {"simulate", "certify", "orbit", "spectrum", "schrodinger"}


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    command: Literal["list", "simulate", "certify", "orbit", "spectrum", "schrodinger", "specialfn"]
    potential: Optional[str] = None
    params: dict = Field(default_factory=dict)
    state: Optional[list[float]] = None          # (x1, x2, p1, p2), or (x1, x2) with energies
    energies: Optional[list[float]] = None       # (E1, E2, K) for orbit
    dt: float = Field(1e-4, gt=0)
    steps: int = Field(100000, ge=1)
    store_every: int = Field(1, ge=1)
    N: int = Field(2000, ge=2)
    L: float = Field(12.0, gt=0)
    p_max: int = Field(10, ge=0)
    cutoff: float = 8.0
    hbar: Optional[float] = Field(None, ge=0)
    tol: Optional[float] = Field(None, gt=0)
    classical: Optional[bool] = None
    out: Optional[str] = None
    seed: int = 0

    @model_validator(mode="after")
    def _per_command(self):
        if self.command in NEEDS_POTENTIAL and not self.potential:
            raise ValueError(f"{self.command} needs --potential")
        if self.command == "spectrum" and self.potential != "rational-1":
            raise ValueError("spectrum is implemented for rational-1 only")
        if self.command == "orbit":
            if self.energies is not None:
                if len(self.energies) != 3 or self.state is None or len(self.state) != 2:
                    raise ValueError("orbit with energies needs energies=[E1,E2,K] and state=[x,y]")
            elif self.state is not None and len(self.state) != 4:
                raise ValueError("state must be [x1,x2,p1,p2]")
        elif self.state is not None and len(self.state) != 4:
            raise ValueError("state must be [x1,x2,p1,p2]")
        if self.command == "specialfn" and "function" not in self.params:
            raise ValueError("specialfn needs params.function (jacobi, weierstrass or painleve)")
        return self


# -------------------------------------------------------------- output

def _dump_json(obj):
    return json.dumps(obj, sort_keys=True, indent=1, ensure_ascii=False) + "\n"


def _emit(text, out, suffix=None):
    if out is None:
        sys.stdout.write(text)
        return
    path = out if suffix is None else out + suffix
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if not isinstance(v, (int, str)) else v for v in r])
    return buf.getvalue()


# ------------------------------------------------------------- commands

def _spec(cfg, classical):
    from .potentials import make_spec
    return make_spec(cfg.potential, cfg.params, classical)


def _initial_state(cfg, spec):
    import numpy as np
    if cfg.state is not None:
        return cfg.state
    from .potentials import sample_region
    rng = np.random.default_rng(cfg.seed)
    x, y = sample_region(spec, 1, rng)[0]
    p = rng.uniform(-0.5, 0.5, 2)
    return [float(x), float(y), float(p[0]), float(p[1])]


def cmd_list(cfg):
    from .potentials import catalog
    rows = catalog()
    if cfg.out is not None:
        _emit(_dump_json(rows), cfg.out)
        return
    w = max(len(r["id"]) for r in rows)
    lines = [f"{'id':<{w}}  classical  quantum  params"]
    for r in rows:
        lines.append(f"{r['id']:<{w}}  {'yes' if r['classical'] else 'no':<9}  "
                     f"{'yes' if r['quantum'] else 'no':<7}  {','.join(r['params'])}")
    sys.stdout.write("\n".join(lines) + "\n")


def cmd_simulate(cfg):
    from .dynamics import PhaseState, integrate
    from .integrals import partial_energy
    spec = _spec(cfg, True if cfg.classical is None else cfg.classical)
    s0 = PhaseState(*_initial_state(cfg, spec))
    watch = {}
    if spec.separable:
        watch = {"H1": partial_energy(spec, 0), "H2": partial_energy(spec, 1)}
    traj = integrate(spec, s0, cfg.dt, cfg.steps, watch=watch, store_every=cfg.store_every)
    if cfg.out is None:
        raise_missing_out()
    traj.to_csv(cfg.out)
    E = traj.conserved_log["H"]
    _emit(_dump_json({"potential": spec.family, "initial_state": list(s0.as_array().tolist()),
                      "dt": cfg.dt, "steps": cfg.steps, "rows": int(len(traj.t)),
                      "energy_max_rel_error": float(abs(E - E[0]).max() / max(abs(E[0]), 1e-300))}),
          cfg.out, ".json")


def raise_missing_out():
    from .errors import ValidationError
    raise ValidationError("this command writes a file; pass --out")


def cmd_certify(cfg):
    from .integrals import A_KEYS, certify_integrability
    classical = cfg.classical if cfg.classical is not None else (cfg.hbar == 0)
    spec = _spec(cfg, classical)
    cert = certify_integrability(spec, hbar=cfg.hbar)
    tol = cfg.tol or 1e-6
    out = {"potential": spec.family, "hbar": cert.hbar, "residual": cert.residual,
           "certified": bool(cert.residual < tol), "tolerance": tol,
           "A": {k: float(v) for k, v in zip(A_KEYS, cert.A)},
           "null_space_dim": int(len(cert.null_basis)), "region": [float(v) for v in cert.region]}
    _emit(_dump_json(out), cfg.out)


def cmd_orbit(cfg):
    from .integrals import certify_integrability
    from .trajectory_algebraic import allowed_box, separated_energies, trace_orbit
    spec = _spec(cfg, True)
    cert = certify_integrability(spec, hbar=0.0)
    if cfg.energies is None:
        z0 = _initial_state(cfg, spec)
        E1, E2 = (float(e) for e in separated_energies(spec, *z0))
    else:
        E1, E2, K = cfg.energies
        z0 = list(cfg.state)
    X = cert.integral(chebyshev=True, region=allowed_box(spec, E1, E2))
    if cfg.energies is None:
        K = float(X.classical(*z0))
    orb = trace_orbit(spec, X, E1, E2, K, z0[:2], tol=cfg.tol or 1e-10)
    if cfg.out is None:
        raise_missing_out()
    orb.to_csv(cfg.out)
    _emit(_dump_json({"potential": spec.family, "E1": E1, "E2": E2, "K": K, "points": int(len(orb.curve)),
                      "closed": orb.closed, "max_residual": float(abs(orb.residual).max()),
                      "certificate_residual": cert.residual}), cfg.out, ".json")


def cmd_spectrum(cfg):
    from .cubic_algebra import build_rational1_model, physical_levels, solve_spectrum
    p = dict(cfg.params)
    hbar = float(p.pop("hbar", cfg.hbar if cfg.hbar is not None else 1.0))
    a, a0 = p.pop("a", None), p.pop("a0", None)
    if p:
        from .errors import ValidationError
        raise ValidationError(f"unknown parameters {sorted(p)}")
    if a is None:
        from .errors import ValidationError
        raise ValidationError("rational-1 needs a")
    model, sf = build_rational1_model(a, hbar, a0)
    res = solve_spectrum(sf, cfg.p_max, tol=cfg.tol or 1e-10, model_id=model.name)
    res.params = {"a2": model.params["a2"], "hbar": hbar}
    full = json.loads(res.to_json())
    ladder = physical_levels(res, cfg.p_max)
    full["ladder"] = [{"p": lv.p, "E": lv.E, "u": lv.u} for lv in ladder]
    full["no_solution"] = res.no_solution
    _emit(_dump_json(full), cfg.out)


def cmd_schrodinger(cfg):
    from .schrodinger import compare_levels, spectrum_2d_separable
    spec = _spec(cfg, False)
    levels = spectrum_2d_separable(spec, cfg.cutoff, L=cfg.L, N=cfg.N, hbar=cfg.hbar, tol=cfg.tol)
    rows = [(lv.E, lv.nx, lv.ny, lv.richardson_error) for lv in levels]
    text = _csv_text(["E", "n_x", "n_y", "richardson_error"], rows)
    report = {"potential": spec.family, "levels": len(rows), "L": cfg.L, "N": cfg.N, "cutoff": cfg.cutoff}
    if spec.family == "rational-1":
        from .cubic_algebra import build_rational1_model, physical_levels, solve_spectrum
        a = cfg.params.get("a", 1.0)
        model, sf = build_rational1_model(a, spec.params["hbar"], cfg.params.get("a0"))
        alg = [lv.E for lv in physical_levels(solve_spectrum(sf, cfg.p_max), cfg.p_max)]
        report["comparison"] = compare_levels(levels, alg, cfg.tol or 1e-3, cfg.cutoff)
    _emit(text, cfg.out)
    if cfg.out is not None:
        _emit(_dump_json(report), cfg.out, ".json")
    else:
        sys.stdout.write(_dump_json(report))


def cmd_specialfn(cfg):
    import numpy as np
    from .errors import ValidationError
    from . import special_functions as sfn
    p = dict(cfg.params)
    kind = p.pop("function")
    x = np.linspace(-cfg.L, cfg.L, cfg.N)
    if kind == "jacobi":
        k = float(p.pop("k", 0.5))
        sn, cn, dn = sfn.jacobi_sn_cn_dn(x, k)
        text = _csv_text(["x", "sn", "cn", "dn"], zip(x, sn, cn, dn))
    elif kind == "weierstrass":
        g2, g3 = float(p.pop("g2", 4.0)), float(p.pop("g3", 0.0))
        P, dP = sfn.weierstrass_p(x, g2, g3, guard=float(p.pop("guard", 1e-3)))
        text = _csv_text(["x", "p", "dp"], zip(x, P, dP))
    elif kind == "painleve":
        which = str(p.pop("kind", "P_I"))
        kw = {k: float(p.pop(k)) for k in ("x0", "w0", "dw0", "a", "b") if k in p}
        interval = tuple(p.pop("interval", (-cfg.L, cfg.L)))
        sol = sfn.PainleveSolution.solve(which, interval=interval, **kw)
        xs = sol.grid(n=cfg.N)
        w, dw = sol(xs)
        text = _csv_text(["x", "w", "dw"], zip(xs, w, dw))
    else:
        raise ValidationError(f"unknown special function {kind!r}")
    if p:
        raise ValidationError(f"unknown parameters {sorted(p)}")
    _emit(text, cfg.out)


HANDLERS = {"list": cmd_list, "simulate": cmd_simulate, "certify": cmd_certify, "orbit": cmd_orbit,
            "spectrum": cmd_spectrum, "schrodinger": cmd_schrodinger, "specialfn": cmd_specialfn}


# ----------------------------------------------------------------- main

class _Parser(argparse.ArgumentParser):
    # usage errors become exit-2 JSON lines instead of argparse's text
    def error(self, message):
        raise ValueError(message)


def _parser():
    ap = _Parser(prog="superint", description="superintegrable potentials toolkit")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON file with RunConfig fields")
    ap.add_argument("--potential")
    ap.add_argument("--params", type=json.loads, help="JSON object")
    ap.add_argument("--state", type=json.loads, help="JSON list [x1,x2,p1,p2]")
    ap.add_argument("--energies", type=json.loads, help="JSON list [E1,E2,K]")
    ap.add_argument("--dt", type=float)
    ap.add_argument("--steps", type=int)
    ap.add_argument("--store-every", type=int, dest="store_every")
    ap.add_argument("--N", type=int)
    ap.add_argument("--L", type=float)
    ap.add_argument("--p-max", type=int, dest="p_max")
    ap.add_argument("--cutoff", type=float)
    ap.add_argument("--hbar", type=float)
    ap.add_argument("--tol", type=float)
    ap.add_argument("--classical", action=argparse.BooleanOptionalAction, default=None)
    ap.add_argument("--out")
    ap.add_argument("--seed", type=int)
    return ap


def _fail(exc_name, message, code):
    sys.stderr.write(json.dumps({"error": exc_name, "message": " ".join(str(message).split()),
                                 "exit_code": code}, sort_keys=True) + "\n")
    return code


def _threads():
    n = os.environ.get("SUPERINT_THREADS")
    if n:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = n


def main(argv=None):
    _threads()
    ap = _parser()
    try:
        ns = ap.parse_args(argv)
    except ValueError as e:
        return _fail("UsageError", e, 2)
    raw = {}
    try:
        if ns.config:
            with open(ns.config, encoding="utf-8") as fh:
                raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        return _fail("ConfigError", e, 2)
    raw.update({k: v for k, v in vars(ns).items() if v is not None and k != "config"})
    try:
        cfg = RunConfig(**raw)
    except PydanticError as e:
        first = e.errors()[0]
        loc = ".".join(map(str, first["loc"]))
        msg = first["msg"].removeprefix("Value error, ")
        return _fail("ValidationError", f"{loc}: {msg}" if loc else msg, 2)
    except (TypeError, ValueError) as e:
        return _fail("ValidationError", e, 2)

    from .errors import SuperintError
    try:
        HANDLERS[cfg.command](cfg)
    except SuperintError as e:
        return _fail(type(e).__name__, e, e.exit_code)
    except (ValueError, TypeError) as e:
        return _fail("ValidationError", e, 2)
    except (ArithmeticError, RuntimeError, MemoryError, OSError) as e:
        return _fail(type(e).__name__, e, 3)
    return 0


if __name__ == "__main__":
    sys.exit(main())
