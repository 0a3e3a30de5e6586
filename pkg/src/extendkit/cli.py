"""Command-line entry point: ``extendkit {analyze,construct,certify,extend}``.

Each run writes one JSON report with the sections ``operator``, ``growth``,
``sequence``, ``star`` and ``extension`` (unused sections are ``null``).
Exit codes: 0 all verdicts pass, 2 a verdict failed, 1 usage or input error.
"""
import argparse
from dataclasses import dataclass, field
import datetime
import json
import math
import os
import sys

import numpy as np
from threadpoolctl import threadpool_limits

from .exceptions import ExtendKitError, SchemaError
from .extension import TruncatedExtension, embed, ext_norm, gram_limit, renorm_hilbert, sqp_norm_check, verify_extension
from .growth import GrowthAnalyzer
from .io import load_operator, load_sequence, operator_to_dict
from .majorants import build_beurling, build_exp, build_geometric, build_poly, check_submultiplicative
from .operators import DenseOperator
from .star import check_decomposition_bound, check_star

COMMANDS = ("analyze", "construct", "certify", "extend")
EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2


@dataclass
class RunConfig:
    command: str
    operator: str
    seq_path: str = None
    recipe: str = None
    s: float = None
    eps: float = None
    length: int = None
    p: float = 2.0
    max_n: int = None
    truncation: int = 64
    seed: int = 0
    output: str = None
    tol: float = 1e-9
    samples: int = 1000
    emit_gram: bool = False
    timestamp: bool = True
    extra: dict = field(default_factory=dict)

    def validate(self):
        if self.command not in COMMANDS:
            raise SchemaError("command", f"expected one of {COMMANDS}")
        if self.command in ("certify", "extend") and (self.seq_path is None) == (self.recipe is None):
            raise SchemaError("sequence", "give exactly one of --seq or --recipe")
        if self.command == "construct" and self.recipe is None:
            raise SchemaError("recipe", "construct needs --recipe")


def _clean(obj):
    """Make ``obj`` JSON-serialisable with non-finite floats as strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isfinite(v):
            return v
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _cert_dict(cert):
    return None if cert is None else cert.to_dict()


def _growth_section(op, cfg):
    N = cfg.max_n or (op.max_n if op.max_n is not None else 4096)
    ga = GrowthAnalyzer(max_n=N).fit(op)
    g = ga.gelfand_
    section = {
        "max_n": ga.n_powers_,
        "P": {"C": ga.C_, "s": ga.s_, "certificate": _cert_dict(ga.certificate_P_)},
        "B": {"partial_sum": ga.beurling_.partial_sum, "tail_bracket": ga.beurling_.tail_bracket,
              "certificate": _cert_dict(ga.beurling_.certificate)},
        "gelfand": None if g is None else {"log_spectral_radius": g.log_spectral_radius,
                                           "log_min_ap": g.log_min_ap, "bracket": g.bracket},
    }
    failed = [c for c in ga.certificates() if c.verdict == "fail"]
    if failed:
        section["witness"] = {"condition": failed[0].condition, "n": failed[0].witness_n}
    return section, not failed


def _build_sequence(op, cfg):
    r = cfg.recipe
    if r == "geometric":
        length = cfg.length or max(4096, cfg.truncation + 16)
        return build_geometric(op, length)
    N = cfg.max_n or (op.max_n if op.max_n is not None else 4096)
    if r == "poly":
        return build_poly(op, cfg.s if cfg.s is not None else 0.0, cfg.eps if cfg.eps is not None else 1.0, N)
    if r == "beurling":
        return build_beurling(op, J=cfg.length, max_n=N)[1]
    if r == "exp":
        if cfg.s is None or cfg.eps is None:
            raise SchemaError("params", "the exp recipe needs --s and --eps")
        return build_exp(op, cfg.s, cfg.eps, N)
    raise SchemaError("recipe", f"unknown recipe {r!r}")


def _sequence(op, cfg):
    if cfg.seq_path is not None:
        return load_sequence(cfg.seq_path)
    return _build_sequence(op, cfg)


def _star_section(op, seq, cfg):
    cert = check_star(op, seq, cfg.p, tol=cfg.tol)
    section = cert.to_dict()
    if not cert.passed:
        j = cert.first_fail_j
        section["witness"] = {"j": j, "margin": float(cert.margins[j - 1])}
    return section, cert.passed


def _extension_section(op, seq, cfg):
    if not isinstance(op, DenseOperator):
        raise SchemaError("operator", "extend needs a dense operator")
    ext = TruncatedExtension(seq, p=cfg.p, truncation=cfg.truncation).fit(op)
    d = ext.n_features_in_
    basis = np.eye(d)
    norms = [ext_norm(ext, embed(ext, basis[i])) for i in range(d)]
    bound = check_decomposition_bound(op, seq, cfg.p, ext.M_, cfg.truncation)
    report = verify_extension(ext, samples=cfg.samples, seed=cfg.seed)
    section = {
        "p": ext.p_,
        "truncation": ext.truncation,
        "M": ext.M_,
        "tight_M": ext.tight_M_,
        "decomposition_bound": {"n": bound.n, "tight_M": bound.tight_M, "exact": bound.exact},
        "embedding_norms": norms,
        "embedding_norms_sq": [v * v for v in norms],
        "verification": report.to_dict(),
    }
    passed = report.passed
    if ext.p_ == 2.0:
        lim = gram_limit(ext)
        ren = renorm_hilbert(ext, lim.Q, samples=cfg.samples, seed=cfg.seed)
        sq = sqp_norm_check(ext, 2, 3, trials=cfg.samples, seed=cfg.seed)
        section["gram_limit"] = {"stages": lim.stages, "converged": lim.converged,
                                 "loewner_ok": lim.loewner_ok, "min_eigenvalue": lim.min_eigenvalue,
                                 "lower_bound": lim.lower_bound, "note": lim.note}
        section["renorm"] = ren.report.to_dict()
        section["sqp"] = {"worst_ratio": sq.worst_ratio, "passed": sq.passed, "method": sq.method}
        if cfg.emit_gram:
            section["gram"] = {"Q_N": {"re": ext.Q_[ext.truncation].real, "im": ext.Q_[ext.truncation].imag},
                               "Q_inf": {"re": lim.Q.real, "im": lim.Q.imag}}
        passed = passed and ren.report.passed and sq.passed and lim.loewner_ok
    if not passed:
        bad = [(k, c) for k, c in report.checks.items() if not c.passed]
        name, chk = bad[0] if bad else ("extension", None)
        section["witness"] = {"check": name, "worst_margin": None if chk is None else chk.worst_margin}
    return section, passed


def run(cfg):
    """Execute ``cfg``; returns ``(exit_code, report)``."""
    cfg.validate()
    op = load_operator(cfg.operator)
    if op.kind == "profile":
        op_doc = {"kind": "profile", "max_n": op.max_n, "envelope": op.envelope}
    else:
        op_doc = operator_to_dict(op)
    report = {"command": cfg.command, "seed": cfg.seed, "operator": op_doc,
              "growth": None, "sequence": None, "star": None, "extension": None}
    ok = True
    if cfg.command == "analyze":
        report["growth"], ok = _growth_section(op, cfg)
    else:
        seq = _sequence(op, cfg)
        report["sequence"] = seq.to_dict()
        if cfg.command == "construct":
            sub, wit = check_submultiplicative(seq, tol=cfg.tol)
            report["sequence"]["submultiplicative"] = {"passed": sub, "witness": wit}
            ok = sub
            if not sub:
                report["sequence"]["witness"] = {"i": wit[0], "j": wit[1]}
        elif cfg.command == "certify":
            report["star"], ok = _star_section(op, seq, cfg)
        else:
            report["star"], ok_star = _star_section(op, seq, cfg)
            report["extension"], ok_ext = _extension_section(op, seq, cfg)
            ok = ok_star and ok_ext
    report["verdict"] = "pass" if ok else "fail"
    if cfg.timestamp:
        report["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    return (EXIT_OK if ok else EXIT_FAIL), _clean(report)


def _parser():
    ap = argparse.ArgumentParser(prog="extendkit", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--operator", required=True, help="JSON/.mtx path or preset (bergman, unitary(d), scalar(a), diag(a,b))")
        sp.add_argument("--max-n", type=int, default=None)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--output", "-o", default=None)
        sp.add_argument("--tol", type=float, default=1e-9)
        sp.add_argument("--no-timestamp", action="store_true")
        if name != "analyze":
            sp.add_argument("--seq", dest="seq_path", default=None)
            sp.add_argument("--recipe", choices=("poly", "beurling", "exp", "geometric"), default=None)
            sp.add_argument("--s", type=float, default=None)
            sp.add_argument("--eps", type=float, default=None)
            sp.add_argument("--length", type=int, default=None)
            sp.add_argument("--p", type=lambda v: math.inf if v in ("inf", "infinity") else float(v), default=2.0)
        if name == "extend":
            sp.add_argument("--trunc", dest="truncation", type=int, default=64)
            sp.add_argument("--samples", type=int, default=1000)
            sp.add_argument("--emit-gram", action="store_true")
    return ap


def main(argv=None):
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    kw = {k: v for k, v in vars(args).items() if v is not None}
    kw["timestamp"] = not kw.pop("no_timestamp", False)
    cfg = RunConfig(**kw)
    threads = os.environ.get("EXTENDKIT_THREADS")
    try:
        limit = int(threads) if threads else None
    except ValueError:
        print("extendkit: EXTENDKIT_THREADS must be an integer", file=sys.stderr)
        return EXIT_USAGE
    try:
        with threadpool_limits(limits=limit):
            code, report = run(cfg)
    except SchemaError as exc:
        print(f"extendkit: schema error in field '{exc.field}': {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ExtendKitError) as exc:
        print(f"extendkit: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"
    if cfg.output:
        with open(cfg.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
