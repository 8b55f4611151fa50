"""Config-driven entry point.

Builds the full pipeline (lattice -> mean field -> modes -> thermal
ensemble -> sampling -> evolution -> observables) from an INI-style
config file, with strict key validation, an on-disk mode-set cache,
and byte-reproducible outputs: a given (config, seed) pair writes
identical files on every run, for any worker count.

Verbs:  run <config>      solve, sample, evolve, write tables
        validate <config> dry-run checks plus stability warnings
        modes <config>    solve and print the mode set only

Exit codes: 0 ok, 2 config error, 3 solver failure, 4 escape
threshold breached.
"""

import argparse
import configparser
import hashlib
import json
import os
import pickle
import sys

import numpy as np

from . import __version__
from .bogoliubov import homogeneous_modes, nonlinear_mu2, solve_bdg
from .dynamics import EvolutionPlan, QuenchSpec, run_ensemble
from .errors import ConfigError, EscapeThresholdError, SolverError
from .lattice import build_lattice
from .meanfield import (SystemParams, is_uniform_potential,
                        solve_number_balance, solve_stationary,
                        uniform_condensate)
from .observables import (g2_zero, mode_occupations, number_statistics,
                          quadrature_variances)
from .sampler import sample_ensemble
from .thermal import (ThermalEnsembleSpec, occupations, squeezed,
                      thermal_state, vacuum)

_SECTIONS = {
    "lattice": {"dims", "lengths"},
    "physics": {"g", "m", "hbar", "n0", "n_target", "potential", "omega",
                "potential_file"},
    "thermal": {"temperature", "zero_mode", "nbar", "r", "theta",
                "representation", "n_traj", "seed"},
    "evolution": {"dt", "n_steps", "save_every", "escape_threshold",
                  "escape_limit"},
    "quench": {"g", "potential", "omega", "potential_file"},
    "output": {"directory", "observables", "format"},
}
_REQUIRED_SECTIONS = ("lattice", "physics", "thermal", "evolution")
_OBSERVABLES = ("occupations", "number", "quadratures", "g2")


def _fail(section, key, msg):
    raise ConfigError(f"[{section}] {key}: {msg}")


class _Section:
    """One config section with typed, consumed-key-tracked access."""

    def __init__(self, name, raw):
        self.name = name
        self.raw = dict(raw)
        self.seen = set()

    def _token(self, key, default, required):
        self.seen.add(key)
        if key not in self.raw:
            if required:
                _fail(self.name, key, "required key is missing")
            return default
        return self.raw[key].strip()

    def text(self, key, default=None, required=False, choices=None):
        tok = self._token(key, default, required)
        if tok is not None and choices is not None and tok not in choices:
            _fail(self.name, key, f"must be one of {', '.join(choices)}")
        return tok

    def floatval(self, key, default=None, required=False):
        tok = self._token(key, default, required)
        if tok is None or isinstance(tok, float):
            return tok
        try:
            return float(tok)
        except ValueError:
            _fail(self.name, key, f"not a number: {tok!r}")

    def intval(self, key, default=None, required=False):
        tok = self._token(key, default, required)
        if tok is None or isinstance(tok, int):
            return tok
        try:
            return int(tok)
        except ValueError:
            _fail(self.name, key, f"not an integer: {tok!r}")

    def float_list(self, key, required=False):
        tok = self._token(key, None, required)
        if tok is None:
            return None
        try:
            return [float(p) for p in tok.split(",")]
        except ValueError:
            _fail(self.name, key, f"not a comma-separated number list: {tok!r}")

    def int_list(self, key, required=False):
        tok = self._token(key, None, required)
        if tok is None:
            return None
        try:
            return [int(p) for p in tok.split(",")]
        except ValueError:
            _fail(self.name, key, f"not a comma-separated integer list: {tok!r}")

    def reject_unseen(self):
        extra = sorted(set(self.raw) - self.seen)
        if extra:
            _fail(self.name, extra[0], "unknown key")

    def reject(self, key, reason):
        if key in self.raw:
            _fail(self.name, key, reason)


def _parse_potential(sec, lat, m):
    """Potential spec -> grid array or None; validates dependent keys."""
    kind = sec.text("potential", default="none",
                    choices=("none", "harmonic", "file"))
    if kind == "none":
        sec.reject("omega", "only valid for potential = harmonic")
        sec.reject("potential_file", "only valid for potential = file")
        return None
    if kind == "harmonic":
        sec.reject("potential_file", "only valid for potential = file")
        omega = sec.float_list("omega", required=True)
        if len(omega) != lat.ndim:
            _fail(sec.name, "omega", f"needs {lat.ndim} comma-separated "
                  "frequencies (one per axis)")
        if any(w < 0 for w in omega):
            _fail(sec.name, "omega", "frequencies must be >= 0")
        grids = lat.position_grids()
        u = np.zeros(lat.shape)
        for w, x, L in zip(omega, grids, lat.lengths):
            u = u + 0.5 * m * w ** 2 * (x - 0.5 * L) ** 2
        return u
    sec.reject("omega", "only valid for potential = harmonic")
    path = sec.text("potential_file", required=True)
    if not os.path.isfile(path):
        _fail(sec.name, "potential_file", f"file not found: {path}")
    try:
        u = np.load(path)
    except Exception as exc:
        _fail(sec.name, "potential_file", f"could not load .npy file ({exc})")
    if u.shape != lat.shape:
        _fail(sec.name, "potential_file",
              f"array shape {u.shape} does not match lattice {lat.shape}")
    return np.asarray(u, dtype=float)


def load_config(path, seed_override=None, out_dir_override=None):
    """Parse and validate a config file into the resolved pipeline inputs."""
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"could not parse config: {exc}") from None

    for name in parser.sections():
        if name not in _SECTIONS:
            raise ConfigError(f"unknown section [{name}]")
    for name in _REQUIRED_SECTIONS:
        if name not in parser:
            raise ConfigError(f"missing required section [{name}]")

    sec = {name: _Section(name, parser[name]) if name in parser
           else _Section(name, {}) for name in _SECTIONS}

    # lattice
    dims = sec["lattice"].int_list("dims", required=True)
    lengths = sec["lattice"].float_list("lengths", required=True)
    if len(dims) != len(lengths):
        _fail("lattice", "lengths", "needs one length per dims entry")
    try:
        lat = build_lattice(dims, lengths)
    except ValueError as exc:
        _fail("lattice", "dims", str(exc))

    # physics
    g = sec["physics"].floatval("g", required=True)
    if g < 0:
        _fail("physics", "g", "attractive interactions (g < 0) are not "
              "supported; this package is repulsive-only")
    m = sec["physics"].floatval("m", default=1.0)
    hbar = sec["physics"].floatval("hbar", default=1.0)
    if m <= 0:
        _fail("physics", "m", "must be positive")
    if hbar <= 0:
        _fail("physics", "hbar", "must be positive")
    n0 = sec["physics"].floatval("n0")
    n_target = sec["physics"].floatval("n_target")
    if (n0 is None) == (n_target is None):
        _fail("physics", "n0", "give exactly one of n0 (condensate number) "
              "or n_target (total number)")
    if n0 is not None and n0 <= 0:
        _fail("physics", "n0", "must be positive")
    if n_target is not None and n_target <= 0:
        _fail("physics", "n_target", "must be positive")
    u_grid = _parse_potential(sec["physics"], lat, m)
    params = SystemParams(g=g, m=m, U=u_grid, hbar=hbar, N_target=n_target)

    # thermal
    temperature = sec["thermal"].floatval("temperature", required=True)
    if temperature < 0:
        _fail("thermal", "temperature", "must be >= 0")
    zm_kind = sec["thermal"].text("zero_mode", default="vacuum",
                                  choices=("vacuum", "thermal", "squeezed"))
    if zm_kind == "thermal":
        sec["thermal"].reject("r", "only valid for zero_mode = squeezed")
        sec["thermal"].reject("theta", "only valid for zero_mode = squeezed")
        nbar = sec["thermal"].floatval("nbar", required=True)
        if nbar < 0:
            _fail("thermal", "nbar", "must be >= 0")
        zm = thermal_state(nbar)
    elif zm_kind == "squeezed":
        sec["thermal"].reject("nbar", "only valid for zero_mode = thermal")
        r = sec["thermal"].floatval("r", required=True)
        theta = sec["thermal"].floatval("theta", default=0.0)
        zm = squeezed(r, theta)
    else:
        sec["thermal"].reject("nbar", "only valid for zero_mode = thermal")
        sec["thermal"].reject("r", "only valid for zero_mode = squeezed")
        sec["thermal"].reject("theta", "only valid for zero_mode = squeezed")
        zm = vacuum()
    representation = sec["thermal"].text("representation", required=True,
                                         choices=("wigner", "positive-p"))
    n_traj = sec["thermal"].intval("n_traj", required=True)
    if n_traj < 1:
        _fail("thermal", "n_traj", "must be >= 1")
    seed = sec["thermal"].intval("seed", default=0)
    if seed_override is not None:
        seed = int(seed_override)
    if seed < 0:
        _fail("thermal", "seed", "must be >= 0")

    # evolution
    dt = sec["evolution"].floatval("dt", required=True)
    if dt <= 0:
        _fail("evolution", "dt", "must be positive")
    n_steps = sec["evolution"].intval("n_steps", required=True)
    if n_steps < 0:
        _fail("evolution", "n_steps", "must be >= 0")
    save_every = sec["evolution"].intval("save_every", default=max(1, n_steps))
    if save_every < 1:
        _fail("evolution", "save_every", "must be >= 1")
    escape_threshold = sec["evolution"].floatval("escape_threshold",
                                                 default=1e6)
    if escape_threshold <= 0:
        _fail("evolution", "escape_threshold", "must be positive")
    escape_limit = sec["evolution"].floatval("escape_limit", default=0.01)
    if not 0.0 <= escape_limit <= 1.0:
        _fail("evolution", "escape_limit", "must be between 0 and 1")

    # quench (optional)
    quench = None
    if "quench" in parser:
        qsec = sec["quench"]
        q_g = qsec.floatval("g")
        if q_g is not None and q_g < 0:
            _fail("quench", "g", "attractive interactions (g < 0) are not "
                  "supported; this package is repulsive-only")
        if "potential" in qsec.raw:
            q_u = _parse_potential(qsec, lat, m)
            quench = QuenchSpec(g=q_g, U=q_u)
        else:
            qsec.reject("omega", "only valid with a quench potential")
            qsec.reject("potential_file", "only valid with a quench potential")
            quench = QuenchSpec(g=q_g)

    plan = EvolutionPlan(dt=dt, n_steps=n_steps, save_every=save_every,
                         scheme=representation, quench=quench,
                         escape_threshold=escape_threshold,
                         escape_fraction_limit=escape_limit)

    # output
    out_dir = sec["output"].text("directory", default="becps-out")
    if out_dir_override is not None:
        out_dir = out_dir_override
    fmt = sec["output"].text("format", default="tsv", choices=("tsv",))
    obs_tok = sec["output"].text("observables", default="occupations, number")
    obs = [p.strip() for p in obs_tok.split(",") if p.strip()]
    for name in obs:
        if name not in _OBSERVABLES:
            _fail("output", "observables",
                  f"unknown observable {name!r} (choose from "
                  f"{', '.join(_OBSERVABLES)})")

    for s in sec.values():
        s.reject_unseen()

    resolved = {
        "lattice": {"dims": dims, "lengths": lengths},
        "physics": {"g": g, "m": m, "hbar": hbar, "n0": n0,
                    "n_target": n_target,
                    "potential": sec["physics"].raw.get("potential", "none")},
        "thermal": {"temperature": temperature, "zero_mode": zm_kind,
                    "nbar": zm.nbar, "r": zm.r, "theta": zm.theta,
                    "representation": representation, "n_traj": n_traj,
                    "seed": seed},
        "evolution": {"dt": dt, "n_steps": n_steps, "save_every": save_every,
                      "escape_threshold": escape_threshold,
                      "escape_limit": escape_limit},
        "quench": (None if quench is None else
                   {"g": quench.g,
                    "potential": sec["quench"].raw.get("potential")}),
        # the output directory is a filesystem location, not a
        # run-defining parameter; keep it out so identical runs into
        # different directories stay byte-identical
        "output": {"format": fmt, "observables": obs},
    }
    return {
        "lat": lat, "params": params, "temperature": temperature,
        "zero_mode": zm, "representation": representation,
        "n_traj": n_traj, "seed": seed, "plan": plan, "out_dir": out_dir,
        "observables": obs, "n0": n0, "resolved": resolved,
    }


# --------------------------------------------------------------------------
# pipeline

def _cache_path(cache_dir, cfg):
    ingredients = {
        "lattice": cfg["resolved"]["lattice"],
        "physics": cfg["resolved"]["physics"],
        # the number-balance split depends on T, so T must key the cache
        # whenever n_target drives the solve
        "temperature": (cfg["temperature"]
                        if cfg["params"].N_target is not None else None),
    }
    blob = json.dumps(ingredients, sort_keys=True).encode()
    digest = hashlib.sha256(blob).hexdigest()[:24]
    return os.path.join(cache_dir, f"modeset-{digest}.pkl")


def solve_modes(cfg, cache_dir=None):
    """Condensate + mode set + nonlinear mu2, with optional disk cache."""
    if cache_dir is not None:
        path = _cache_path(cache_dir, cfg)
        if os.path.isfile(path):
            with open(path, "rb") as fh:
                condensate, modeset = pickle.load(fh)
            return condensate, modeset

    lat, params = cfg["lat"], cfg["params"]
    if params.N_target is not None:
        condensate = solve_number_balance(params, lat, cfg["temperature"])
    elif is_uniform_potential(params, lat):
        condensate = uniform_condensate(params, lat, cfg["n0"])
    else:
        condensate = solve_stationary(params, lat, cfg["n0"])

    if is_uniform_potential(params, lat):
        modeset = homogeneous_modes(params, lat,
                                    condensate.N0 / lat.volume)
    else:
        modeset = solve_bdg(params, lat, condensate,
                            n_modes=lat.n_points - 1)
    nonlinear_mu2(modeset, condensate)

    if cache_dir is not None:
        os.makedirs(cache_dir, exist_ok=True)
        tmp = path + ".tmp"
        with open(tmp, "wb") as fh:
            pickle.dump((condensate, modeset), fh)
        os.replace(tmp, path)
    return condensate, modeset


# --------------------------------------------------------------------------
# output writers (repr float formatting keeps bytes reproducible)

def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return repr(float(x))


def _write_tsv(path, header, rows, preamble=()):
    lines = [f"# {p}" for p in preamble]
    lines.append("\t".join(header))
    for row in rows:
        lines.append("\t".join(_fmt(x) for x in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _modes_table(condensate, modeset):
    preamble = [
        f"N0 = {_fmt(condensate.N0)}",
        f"mu_e = {_fmt(condensate.mu_e)}",
        f"mu1 = {_fmt(condensate.mu1)}",
        f"mu2 = {_fmt(condensate.mu2)}",
        f"alpha = {_fmt(condensate.alpha)}",
    ]
    lat = modeset.lat
    u0 = float(np.sum(np.abs(modeset.u0_field) ** 2) * lat.dv)
    v0 = float(np.sum(np.abs(modeset.v0_field) ** 2) * lat.dv)
    rows = [(0, 0.0, u0, v0)]
    un, vn = modeset.u_norm2, modeset.v_norm2
    for i in range(modeset.n_modes):
        rows.append((int(modeset.k_flat[i]), modeset.energies[i],
                     un[i], vn[i]))
    return preamble, ("k_flat", "energy", "u_norm2", "v_norm2"), rows


def _write_observables(out_dir, cfg, series, modeset):
    names = cfg["observables"]
    lat = modeset.lat
    written = {}
    if "occupations" in names:
        spec_occ = mode_occupations(series, lat)
        rows = []
        for it, t in enumerate(spec_occ.zero_mode.times):
            rows.append((t, 0, spec_occ.zero_mode.values[it],
                         spec_occ.zero_mode.stderr[it]))
            for j, k in enumerate(spec_occ.k_flat):
                rows.append((t, int(k), spec_occ.excited.values[it, j],
                             spec_occ.excited.stderr[it, j]))
        _write_tsv(os.path.join(out_dir, "occupations.tsv"),
                   ("t", "k_flat", "occupation", "stderr"), rows)
        written["occupations"] = "occupations.tsv"
    if "number" in names:
        n_series, v_series = number_statistics(series, lat)
        rows = [(t, n_series.values[i], n_series.stderr[i],
                 v_series.values[i], v_series.stderr[i])
                for i, t in enumerate(n_series.times)]
        _write_tsv(os.path.join(out_dir, "number.tsv"),
                   ("t", "n_total", "n_stderr", "number_variance",
                    "variance_stderr"), rows)
        written["number"] = "number.tsv"
        written["_number_final"] = (float(n_series.values[-1]),
                                    float(n_series.stderr[-1]))
    if "quadratures" in names:
        try:
            quads = quadrature_variances(series, modeset,
                                         zero_mode_theta=cfg["zero_mode"].theta)
        except ValueError as exc:
            raise ConfigError(f"[output] observables: quadratures: {exc}")
        rows = []
        for it, t in enumerate(quads.var_p.times):
            for row in range(len(quads.branch)):
                rows.append((t, int(quads.k_flat[row]), quads.branch[row],
                             quads.var_p.values[it, row],
                             quads.var_p.stderr[it, row],
                             quads.var_q.values[it, row],
                             quads.var_q.stderr[it, row]))
        _write_tsv(os.path.join(out_dir, "quadratures.tsv"),
                   ("t", "k_flat", "branch", "var_p", "var_p_stderr",
                    "var_q", "var_q_stderr"), rows)
        written["quadratures"] = "quadratures.tsv"
    if "g2" in names:
        try:
            g2 = g2_zero(series, lat)
        except ValueError as exc:
            raise ConfigError(f"[output] observables: g2: {exc}")
        rows = [(t, g2.values[i], g2.stderr[i])
                for i, t in enumerate(g2.times)]
        _write_tsv(os.path.join(out_dir, "g2.tsv"),
                   ("t", "g2_zero", "stderr"), rows)
        written["g2"] = "g2.tsv"
    return written


def _stability_warnings(cfg, modeset):
    warnings = []
    e_max = float(np.max(modeset.energies)) if modeset.n_modes else 0.0
    temperature = cfg["temperature"]
    if e_max > 0 and temperature > e_max:
        warnings.append(
            f"temperature {_fmt(temperature)} exceeds the largest "
            f"quasiparticle energy {_fmt(e_max)}; the mode cutoff is too "
            "low for this temperature")
    hbar = cfg["params"].hbar
    x = cfg["plan"].dt * e_max / hbar
    if x > 0.1:
        warnings.append(
            f"dt*eps_max/hbar = {_fmt(x)} > 0.1; the time step is too "
            "coarse for the fastest mode")
    return warnings


# --------------------------------------------------------------------------
# verbs

def _cmd_modes(cfg, cache_dir):
    condensate, modeset = solve_modes(cfg, cache_dir)
    preamble, header, rows = _modes_table(condensate, modeset)
    for p in preamble:
        print(f"# {p}")
    print("\t".join(header))
    for row in rows:
        print("\t".join(_fmt(x) for x in row))
    return 0


def _cmd_validate(cfg, cache_dir):
    condensate, modeset = solve_modes(cfg, cache_dir)
    warnings = _stability_warnings(cfg, modeset)
    if not warnings:
        print("ok")
    for w in warnings:
        print(f"warning: {w}")
    return 0


def _cmd_run(cfg, cache_dir, n_workers):
    out_dir = cfg["out_dir"]
    os.makedirs(out_dir, exist_ok=True)
    condensate, modeset = solve_modes(cfg, cache_dir)
    lat = modeset.lat

    manifest = {"config": cfg["resolved"], "seed": cfg["seed"],
                "version": __version__}
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")

    preamble, header, rows = _modes_table(condensate, modeset)
    _write_tsv(os.path.join(out_dir, "modes.tsv"), header, rows,
               preamble=preamble)

    spec = ThermalEnsembleSpec(T=cfg["temperature"],
                               zero_mode_state=cfg["zero_mode"],
                               representation=cfg["representation"],
                               n_traj=cfg["n_traj"], seed=cfg["seed"])
    occ = occupations(modeset, spec.T)
    ensemble = sample_ensemble(modeset, occ, spec, condensate)

    escape_path = os.path.join(out_dir, "escapes.txt")
    try:
        series = run_ensemble(ensemble, cfg["plan"], cfg["params"], lat,
                              n_workers=n_workers)
    except EscapeThresholdError as exc:
        if cfg["representation"] == "positive-p":
            with open(escape_path, "w") as fh:
                fh.write(f"escape threshold breached: {exc}\n")
        raise
    if cfg["representation"] == "positive-p":
        frac = series.n_escaped / series.psi.shape[1]
        with open(escape_path, "w") as fh:
            fh.write(f"{series.n_escaped} of {series.psi.shape[1]} "
                     f"trajectories escaped ({_fmt(frac)})\n")

    written = _write_observables(out_dir, cfg, series, modeset)
    summary = {
        "version": __version__,
        "seed": cfg["seed"],
        "representation": cfg["representation"],
        "n_traj": cfg["n_traj"],
        "n_escaped": series.n_escaped,
        "times": [float(t) for t in series.times],
        "condensate": {
            "N0": condensate.N0, "mu_e": condensate.mu_e,
            "mu1": condensate.mu1, "mu2": condensate.mu2,
            "alpha": condensate.alpha,
        },
        "files": {k: v for k, v in written.items() if not k.startswith("_")},
    }
    if "_number_final" in written:
        summary["final_number"] = {"mean": written["_number_final"][0],
                                   "stderr": written["_number_final"][1]}
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="becps",
        description="Phase-space simulations of thermal Bose fields")
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in ("run", "validate", "modes"):
        p = sub.add_parser(verb)
        p.add_argument("config")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--workers", type=int,
                       default=os.cpu_count() or 1)
        p.add_argument("--out-dir", default=None)
        p.add_argument("--cache-dir", default=None)
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config, seed_override=args.seed,
                          out_dir_override=args.out_dir)
        if args.verb == "run":
            return _cmd_run(cfg, args.cache_dir, args.workers)
        if args.verb == "validate":
            return _cmd_validate(cfg, args.cache_dir)
        return _cmd_modes(cfg, args.cache_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, ValueError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    except EscapeThresholdError as exc:
        print(f"escape threshold breached: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
