"""Command-line entry point ``acoustic-rte``.

Subcommands: ``trace``, ``xsec``, ``transport``, ``wigner``, ``validate``.
Exit codes: 0 success, 2 configuration error, 3 runtime error, 4 failed
invariant check (``validate --deep``).  Failures print a one-line JSON record
to stderr.  Every run except ``validate`` writes ``resolved_config.cfg`` next
to its CSV outputs.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from .config import RunConfig, load_config
from .errors import AcousticRTEError, ConfigError, ParseError, ValidationError

__all__ = ["main", "run"]

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_CHECK = 0, 2, 3, 4

TRACE_COLUMNS = ["t", "x1", "x2", "x3", "k1", "k2", "k3", "omega", "h_drift"]
XSEC_COLUMNS = ["k_mag", "k_hat1", "k_hat2", "k_hat3", "p_mag", "p_hat1", "p_hat2", "p_hat3",
                "angle", "pair", "value"]
TOTAL_COLUMNS = ["k_mag", "k_hat1", "k_hat2", "k_hat3", "branch", "total", "gain"]


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([_fmt(v) for v in row])


def _outdir(cfg: RunConfig):
    path = cfg["output"]["dir"]
    os.makedirs(path, exist_ok=True)
    with open(os.path.join(path, "resolved_config.cfg"), "w", encoding="utf-8") as fh:
        fh.write(cfg.to_text())
    return path


def cmd_trace(cfg: RunConfig, workers=1):
    from .rays import integrate_ray, launch

    r = cfg["ray"]
    model = cfg.flow_model()
    init = launch(model, np.array(r["x0"]), np.array(r["k0"]), r["branch"], r["t0"])
    samples = None
    if r["n_samples"] > 0:
        samples = np.linspace(r["t0"], r["t_final"], r["n_samples"])
    traj = integrate_ray(model, init, cfg.integrator(), r["t_final"], samples)
    out = _outdir(cfg)
    rows = [(traj.t[i], *traj.x[i], *traj.k[i], traj.omega[i], traj.h_rel[i])
            for i in range(len(traj))]
    _write_csv(os.path.join(out, "trace.csv"), TRACE_COLUMNS, rows)
    return [os.path.join(out, "trace.csv")]


def _perpendicular(u):
    a = np.zeros(3)
    a[np.argmin(np.abs(u))] = 1.0
    e = a - np.dot(a, u) * u
    return e / np.linalg.norm(e)


def cmd_xsec(cfg: RunConfig, workers=1):
    from .flow import evaluate_flow
    from .xsec import BranchPair, gain_cross_section, shell_sigma, sigma_branch, total_cross_section

    s = cfg["xsec"]
    spectrum = cfg.spectrum()
    if spectrum is None:
        raise ValidationError("[spectrum].kind", "xsec needs a spectrum other than none")
    if spectrum.frozen and s["p_mag"]:
        raise ValidationError("[xsec].p_mag", "must be empty for frozen spectra (|p| = |k|)")
    model = cfg.flow_model()
    state = evaluate_flow(model, np.array(s["x"]), s["t"])
    khat = np.array(s["k_dir"]) / np.linalg.norm(s["k_dir"])
    e1 = _perpendicular(khat)
    angles = np.linspace(0.0, np.pi, s["n_angles"]) if s["n_angles"] > 1 else np.zeros(1)
    sym = {"+": 1, "-": -1}
    pairs = [BranchPair(sym[p[1]], sym[p[0]]) for p in s["pairs"]]
    rows = []
    for km in s["k_mag"]:
        k = km * khat
        for pm in (s["p_mag"] or (km,)):
            for th in angles:
                ph = np.cos(th) * khat + np.sin(th) * e1
                for pair in pairs:
                    if spectrum.frozen:
                        val = shell_sigma(state, k, ph, pair, spectrum, False)
                    else:
                        val = sigma_branch(state, k, pm * ph, pair, spectrum)
                    rows.append((km, *khat, pm, *ph, th, pair.label, float(val)))
    out = _outdir(cfg)
    paths = [os.path.join(out, "xsec.csv")]
    _write_csv(paths[0], XSEC_COLUMNS, rows)
    if s["total"]:
        quad = cfg.quadrature()
        trows = []
        for km in s["k_mag"]:
            for b in (1, -1):
                tot = total_cross_section(state, km * khat, b, spectrum, quad)
                gain = gain_cross_section(state, km * khat, b, spectrum, quad)
                trows.append((km, *khat, b, float(tot), float(gain)))
        paths.append(os.path.join(out, "total.csv"))
        _write_csv(paths[1], TOTAL_COLUMNS, trows)
    return paths


def cmd_transport(cfg: RunConfig, workers=None):
    from .transport import run_transport

    result = run_transport(cfg.transport_config(workers=workers))
    out = _outdir(cfg)
    paths = []
    for i, h in enumerate(result.snapshots):
        path = os.path.join(out, f"histogram_{i:03d}.csv")
        h.to_csv(path)
        paths.append(path)
    path = os.path.join(out, "summary.csv")
    result.write_summary(path)
    return paths + [path]


def _synthesize(cfg: RunConfig):
    from .wigner import SampledField, gaussian_packet, oscillation_example, plane_waves

    f = cfg["field"]
    eps = f["eps"]
    if f["kind"] == "plane":
        waves = np.reshape(f["waves"], (-1, 3))
        fn = lambda X, T: plane_waves(X, T, waves, eps)  # noqa: E731
    elif f["kind"] == "packet":
        fn = lambda X, T: gaussian_packet(X, T, eps, f["k0"], f["omega0"], f["center"],  # noqa: E731
                                          f["width"], f["speed"], f["amplitude"][0])
    else:
        mean = np.polynomial.Polynomial(f["mean"])
        amp = np.polynomial.Polynomial(f["amplitude"])
        fn = lambda X, T: oscillation_example(X, eps, mean, amp) + 0.0 * T  # noqa: E731
    return SampledField.from_function(fn, f["nx"], f["nt"], f["dx"], f["dt"], eps)


def cmd_wigner(cfg: RunConfig, workers=1):
    from .wigner import Taper, energy_densities, wigner_transform_xt

    f = cfg["field"]
    field = _synthesize(cfg)
    taper = Taper(f["taper"], f["taper_width"])
    # with zero padding, points closer than half a lag window to the edge see a truncated taper
    edge = f["boundary"] == "zero"
    sx = f["n_lags_x"] // 2 if edge else 0
    st = f["n_lags_t"] // 2 if edge else 0
    if edge and (sx >= f["nx"] - sx or st >= f["nt"] - st):
        raise ValidationError("[field].n_lags_x", "must be below the grid size for zero padding")
    w = wigner_transform_xt(field, taper, f["n_lags_x"], f["n_lags_t"],
                            x_index=slice(sx, f["nx"] - sx + 1, f["x_stride"]),
                            t_index=slice(st, f["nt"] - st + 1, f["t_stride"]),
                            boundary=f["boundary"])
    strain, kinetic = energy_densities(w, cfg.flow_model())
    out = _outdir(cfg)
    rows = ((w.x[i], w.t[j], w.k[a], w.omega[b], w.values[i, j, a, b])
            for i in range(w.x.size) for j in range(w.t.size)
            for a in range(w.k.size) for b in range(w.omega.size))
    paths = [os.path.join(out, n) for n in ("wigner.csv", "marginal_k.csv", "density.csv")]
    _write_csv(paths[0], ["x", "t", "k", "omega", "value"], rows)
    mk = w.k_marginal()
    _write_csv(paths[1], ["x", "t", "k", "value"],
               ((w.x[i], w.t[j], w.k[a], mk[i, j, a]) for i in range(w.x.size)
                for j in range(w.t.size) for a in range(w.k.size)))
    dens = w.density()
    _write_csv(paths[2], ["x", "t", "density", "strain", "kinetic"],
               ((w.x[i], w.t[j], dens[i, j], strain[i, j], kinetic[i, j])
                for i in range(w.x.size) for j in range(w.t.size)))
    with open(os.path.join(out, "wigner_meta.json"), "w", encoding="utf-8") as fh:
        json.dump(w.meta, fh, sort_keys=True)
    return paths


COMMANDS = {"trace": cmd_trace, "xsec": cmd_xsec, "transport": cmd_transport, "wigner": cmd_wigner}


def run(subcommand: str, cfg: RunConfig, workers=None, deep=False, stream=sys.stdout):
    """Execute ``subcommand``; return the exit status."""
    if subcommand == "validate":
        if not deep:
            return EXIT_OK
        from .validation import run_invariant_suite

        results = run_invariant_suite(cfg, seed=cfg["mc"]["seed"])
        for r in results:
            print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}", file=stream)
        return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK
    COMMANDS[subcommand](cfg, workers=workers)
    return EXIT_OK


def _error_record(kind, exc, subcommand):
    rec = {"status": "error", "kind": kind, "type": type(exc).__name__, "message": str(exc),
           "subcommand": subcommand}
    if isinstance(exc, ParseError):
        rec.update(line=exc.line, column=exc.column)
    if isinstance(exc, ValidationError):
        rec.update(key=exc.key, constraint=exc.constraint)
    return json.dumps(rec, sort_keys=True)


def build_parser():
    parser = argparse.ArgumentParser(prog="acoustic-rte", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("trace", "xsec", "transport", "wigner", "validate"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="configuration file")
        p.add_argument("--seed", type=int, help="override [mc].seed")
        p.add_argument("--workers", type=int, help="worker processes")
        p.add_argument("--out", help="override [output].dir")
        if name == "validate":
            p.add_argument("--deep", action="store_true", help="run the invariant suite")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_overrides("mc", seed=args.seed)
        if args.out is not None:
            cfg = cfg.with_overrides("output", dir=args.out)
        if args.workers is not None and args.workers < 1:
            raise ValidationError("--workers", "must be > 0")
    except ConfigError as exc:
        print(_error_record("config", exc, args.command), file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(_error_record("config", exc, args.command), file=sys.stderr)
        return EXIT_CONFIG
    try:
        return run(args.command, cfg, workers=args.workers, deep=getattr(args, "deep", False))
    except ConfigError as exc:
        print(_error_record("config", exc, args.command), file=sys.stderr)
        return EXIT_CONFIG
    except (AcousticRTEError, ValueError, ArithmeticError, OSError) as exc:
        print(_error_record("runtime", exc, args.command), file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
