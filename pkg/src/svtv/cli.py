"""Command line: ``svtv {degrade,estimate,restore,prox-field,metrics}``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .admm import RESTORE_EPS_REG, AdmmConfig, admm_restore
from .distributions import NoiseModel, gg_std_from_scale, parse_shape
from .errors import ConfigError, NumericalError
from .estimation import EstimationConfig, estimate_maps
from .fileio import (load_config, provenance, read_pgm, read_sidecar, write_map_blob,
                     write_maps_csv, write_pgm, write_sidecar)
from .imagecore import BlurOperator, gaussian_kernel
from .metrics import isnr, ssim
from .prox import prox_field
from .regularizers import RegKind

log = logging.getLogger("svtv")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4


def _estimation_config(cfg, eps_default: float) -> EstimationConfig:
    eps = cfg["estimation.eps_reg"]
    return EstimationConfig(
        radius=cfg["estimation.radius"], eps_reg=eps_default if eps is None else eps,
        p_min=cfg["estimation.p_min"], p_max=cfg["estimation.p_max"],
        a_floor=cfg["estimation.a_floor"], grid_p=cfg["estimation.grid_p"],
        grid_theta=cfg["estimation.grid_theta"], grid_a=cfg["estimation.grid_a"])


def _blur(cfg, shape) -> BlurOperator:
    return BlurOperator(gaussian_kernel(cfg["blur.band"], cfg["blur.sigma"]), shape, cfg["blur.boundary"])


def _noise_from(cfg, record):
    """Noise model from the config, falling back to a sidecar record."""
    q, sigma, omega = cfg["noise.q"], cfg["noise.sigma"], cfg["noise.omega"]
    if sigma is None and omega is None and record is not None:
        q, sigma = parse_shape(record["q"]), record["sigma"]
    if sigma is None and omega is not None:
        sigma = gg_std_from_scale(omega, parse_shape(q))
    if sigma is None:
        raise ConfigError("noise parameters missing: give noise.sigma or noise.omega, "
                          "or keep the sidecar written by 'degrade'")
    return NoiseModel(q, float(sigma), cfg["noise.tau"])


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_maps(out: Path, maps, kind: RegKind, header):
    fields = {k: v for k, v in maps.as_dict().items() if k in kind.fields}
    write_maps_csv(out / "maps.csv", fields, header)
    manifest = {"header": header, "blobs": {}}
    for name, arr in fields.items():
        path = out / f"{name}.map"
        write_map_blob(path, arr)
        manifest["blobs"][name] = path.name
    return manifest


def _check_inputs(*paths):
    for p in paths:
        if p is not None and not Path(p).is_file():
            raise FileNotFoundError(f"no such file: {p}")


def cmd_degrade(args, cfg) -> int:
    _check_inputs(args.input)
    u, _ = read_pgm(args.input)
    seed = cfg["seed"] if args.seed is None else args.seed
    A = _blur(cfg, u.shape)
    b = A.apply(u)
    q = cfg["noise.q"]
    sigma = cfg["noise.sigma"]
    if sigma is None and cfg["noise.omega"] is not None:
        sigma = gg_std_from_scale(cfg["noise.omega"], q)
    sigma = 0.0 if sigma is None else float(sigma)
    omega = None
    if sigma > 0:
        noise = NoiseModel(q, sigma, cfg["noise.tau"])
        omega = noise.omega
        b = b + noise.sample(u.shape, seed=seed)
    out = _out_dir(args)
    header = provenance(cfg, seed, "degrade")
    path = out / "degraded.pgm"
    write_pgm(path, b, bits=cfg["io.bits"], comments=header)
    write_sidecar(path, {
        "q": "inf" if math.isinf(q) else q, "sigma": sigma, "omega": omega, "tau": cfg["noise.tau"],
        "seed": seed, "blur_band": cfg["blur.band"], "blur_sigma": cfg["blur.sigma"],
        "blur_boundary": cfg["blur.boundary"], "bits": cfg["io.bits"], "source": str(args.input),
        "config_hash": cfg.digest()})
    print(path)
    return EXIT_OK


def cmd_estimate(args, cfg) -> int:
    _check_inputs(args.input)
    u, _ = read_pgm(args.input)
    kind = RegKind.parse(cfg["model"])
    maps = estimate_maps(kind, u, _estimation_config(cfg, EstimationConfig.eps_reg), cfg["gradient.boundary"])
    out = _out_dir(args)
    seed = cfg["seed"] if args.seed is None else args.seed
    manifest = _write_maps(out, maps, kind, provenance(cfg, seed, "estimate"))
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(out / "maps.csv")
    return EXIT_OK


def _admm_config(cfg, noise) -> AdmmConfig:
    extra = {}
    for key, name in (("admm.beta_g", "beta_g"), ("admm.beta_r", "beta_r")):
        if cfg[key] is not None:
            extra[name] = cfg[key]
    init = cfg["admm.init"]
    if init not in ("observed", "flat"):
        _check_inputs(init)
        init, _ = read_pgm(init)
    refresh = cfg["admm.refresh"]
    return AdmmConfig(
        noise=noise, tol=cfg["admm.tol"], max_iters=cfg["admm.max_iters"],
        param_refresh=None if refresh is None else (0 if math.isinf(refresh) else int(refresh)),
        init=init, estimation=_estimation_config(cfg, RESTORE_EPS_REG), gradient_boundary=cfg["gradient.boundary"],
        prox_grid=cfg["admm.prox_grid"], **extra)


def cmd_restore(args, cfg) -> int:
    _check_inputs(args.input, cfg["io.truth"])
    b, _ = read_pgm(args.input)
    record = read_sidecar(args.input)
    if record is not None:
        # blur settings written by 'degrade' win over defaults, not over explicit keys
        for key, rkey in (("blur.band", "blur_band"), ("blur.sigma", "blur_sigma"),
                          ("blur.boundary", "blur_boundary")):
            if key not in cfg.values and rkey in record:
                cfg.set(key, record[rkey])
    noise = _noise_from(cfg, record)
    kind = RegKind.parse(cfg["model"])
    admm_cfg = _admm_config(cfg, noise)
    A = _blur(cfg, b.shape)
    result = admm_restore(b, A, kind, admm_cfg)

    out = _out_dir(args)
    seed = cfg["seed"] if args.seed is None else args.seed
    header = provenance(cfg, seed, "restore")
    write_pgm(out / "restored.pgm", result.u_star, bits=cfg["io.bits"], comments=header)
    manifest = _write_maps(out, result.maps, kind, header)
    result.write_diagnostics(out / "diagnostics.csv", header)
    summary = {
        "model": kind.value, "iterations": result.iterations, "eta": result.eta,
        "converged": result.converged, "heuristic": result.heuristic,
        "fidelity": result.fidelity, "delta": result.delta,
    }
    if cfg["io.truth"] is not None:
        u, _ = read_pgm(cfg["io.truth"])
        summary["isnr"] = isnr(b, u, result.u_star)
        summary["ssim"] = ssim(u, result.u_star)
    manifest["summary"] = summary
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    for k, v in summary.items():
        print(f"{k:10s} {v}")
    return EXIT_OK


def cmd_prox_field(args, cfg) -> int:
    kind = RegKind.parse(cfg["model"])
    w, e = prox_field(kind, cfg["prox.beta"], cfg["prox.alpha"], cfg["prox.p"], cfg["prox.theta"],
                      cfg["prox.a"], grid_n=cfg["prox.grid"], extent=cfg["prox.extent"])
    out = _out_dir(args)
    seed = cfg["seed"] if args.seed is None else args.seed
    path = out / "prox_field.csv"
    with open(path, "w", newline="") as fh:
        for line in provenance(cfg, seed, "prox-field"):
            fh.write(f"# {line}\n")
        wr = csv.writer(fh)
        wr.writerow(["w1", "w2", "e1", "e2"])
        for w1, w2, e1, e2 in zip(w[0].ravel(), w[1].ravel(), e[0].ravel(), e[1].ravel()):
            wr.writerow([repr(float(w1)), repr(float(w2)), repr(float(e1)), repr(float(e2))])
    print(path)
    return EXIT_OK


def cmd_metrics(args, cfg) -> int:
    _check_inputs(args.truth, args.observed, args.restored)
    u, _ = read_pgm(args.truth)
    b, _ = read_pgm(args.observed)
    us, _ = read_pgm(args.restored)
    print(f"ISNR\t{isnr(b, u, us)!r}")
    print(f"SSIM\t{ssim(u, us)!r}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="svtv", description="Space-variant TV image restoration.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--seed", type=int, help="overrides the config seed")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("degrade", parents=[common], help="blur and add noise to an image")
    p.add_argument("input")
    p.set_defaults(func=cmd_degrade)
    p = sub.add_parser("estimate", parents=[common], help="estimate parameter maps of an image")
    p.add_argument("input")
    p.set_defaults(func=cmd_estimate)
    p = sub.add_parser("restore", parents=[common], help="restore a degraded image")
    p.add_argument("input")
    p.set_defaults(func=cmd_restore)
    p = sub.add_parser("prox-field", parents=[common], help="sample prox(w) - w on a grid")
    p.set_defaults(func=cmd_prox_field)
    p = sub.add_parser("metrics", parents=[common], help="ISNR and SSIM of a restoration")
    p.add_argument("truth")
    p.add_argument("observed")
    p.add_argument("restored")
    p.set_defaults(func=cmd_metrics)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
