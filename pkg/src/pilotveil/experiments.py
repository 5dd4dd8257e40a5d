"""Scenario loading, the two-stage bound pipeline, figure sweeps, and CSV.

Config files are JSON with sections ``ofdm``, ``scenario``, ``scheme``
and optionally ``sweep``; every omitted field takes the default urban
test scene (Alice at (80,80) m, three legitimate anchors, two
unauthorized ones, 28 GHz carrier, 100 MHz / 1024 subcarriers, 10 dBm).
dB values appear only in config files and CLI flags; everything behind
the loaders is linear SI.
"""

import json
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .delay_mismatch import DelayMismatchReport, delay_report, crb_delay_pilot
from .errors import PilotveilError, SchemaError, ValidationError
from .position_mismatch import (
    DelayCovariances,
    MODE_PAPER_LITERAL,
    PositionBoundReport,
    crb_position,
    generalized_fims,
    lb_position,
    mcrb_position,
    pseudo_true_position,
    true_delays,
)
from .signal_model import (
    CLEAN,
    AmScheme,
    Anchor,
    AnScheme,
    OfdmConfig,
    ROLE_EVE,
    ROLE_LEGIT,
    Scenario,
)

SPEC_VERSION = 1

# Single fitted convention scalar on |alpha|^2 that aligns the free-space
# absolute error floors with the reference series (see README); the
# config-file default remains 1.0.
FITTED_GAIN_CALIBRATION = 2.0

DEFAULT_ALICE = (80.0, 80.0)
DEFAULT_BOBS = ((0.0, 0.0), (90.0, 0.0), (80.0, 160.0))
DEFAULT_EVES = ((0.0, 0.0), (80.0, 160.0))
DEFAULT_OFDM = {
    "num_subcarriers": 1024,
    "bandwidth_hz": 100e6,
    "carrier_hz": 28e9,
    "tx_power_dbm": 10.0,
    "noise_psd_dbm_hz": -173.855,
}

PRESETS = ("fig2", "fig3", "fig4", "fig5a", "fig5b", "custom")

FIG2_T_VALUES = (-2.0, -1.0, 0.0, 1.0, 4.0, 8.0)
FIG2_L_VALUES = tuple(range(1, 16))
FIG3_BETA_DB = tuple(np.linspace(-10.0, 20.0, 31))
FIG3_DELTA_NORM = tuple(k / 21.0 for k in range(21))
FIG4_BETA_DB = tuple(range(-20, 5, 5)) + tuple(range(1, 26)) + tuple(range(30, 55, 5))
FIG5A_P_DBM = tuple(range(-70, -40, 5)) + tuple(range(-40, -29, 1)) + tuple(range(-25, 25, 5))
FIG5B_P_DBM = tuple(range(-70, 25, 5))


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1000.0


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def _expect(cond, fieldpath, message):
    if not cond:
        raise SchemaError(fieldpath, message)


def _num(raw, fieldpath, positive=False):
    _expect(isinstance(raw, (int, float)) and not isinstance(raw, bool), fieldpath, "expected a number")
    if positive:
        _expect(raw > 0, fieldpath, "must be > 0")
    return float(raw)


def _point_list(raw, fieldpath):
    _expect(isinstance(raw, (list, tuple)), fieldpath, "expected a list of points")
    out = []
    for i, p in enumerate(raw):
        _expect(isinstance(p, (list, tuple)) and len(p) in (2, 3), f"{fieldpath}[{i}]",
                "expected an [x, y] or [x, y, z] point")
        out.append(tuple(_num(v, f"{fieldpath}[{i}][{j}]") for j, v in enumerate(p)))
    return out


def _build_scheme(raw: dict, bandwidth: float):
    kind = raw.get("type", "clean")
    _expect(kind in ("clean", "am", "an"), "scheme.type", "must be 'clean', 'am' or 'an'")
    if kind == "clean":
        return CLEAN
    if kind == "am":
        if "decay_t" in raw or "num_paths" in raw:
            _expect("num_paths" in raw and "decay_t" in raw, "scheme",
                    "the decay generator needs both num_paths and decay_t")
            num_paths = raw["num_paths"]
            _expect(isinstance(num_paths, int) and num_paths >= 1, "scheme.num_paths",
                    "expected an integer >= 1")
            return AmScheme.from_decay(num_paths, _num(raw["decay_t"], "scheme.decay_t"), bandwidth)
        _expect("gains_db" in raw, "scheme.gains_db", "AM scheme needs gains_db")
        gains = [db_to_linear(_num(g, f"scheme.gains_db[{i}]")) for i, g in enumerate(raw["gains_db"])]
        if "delays_norm" in raw:
            delays = [_num(d, f"scheme.delays_norm[{i}]") / bandwidth
                      for i, d in enumerate(raw["delays_norm"])]
        else:
            _expect("delays_s" in raw, "scheme.delays_s",
                    "AM scheme needs delays_norm (units of 1/W) or delays_s")
            delays = [_num(d, f"scheme.delays_s[{i}]") for i, d in enumerate(raw["delays_s"])]
        _expect(len(delays) == len(gains), "scheme.delays_norm", "gains/delays length mismatch")
        return AmScheme(gains=tuple(gains), delays=tuple(delays))
    strength = db_to_linear(_num(raw.get("strength_db", 0.0), "scheme.strength_db"))
    seed = raw.get("seed", 1)
    _expect(isinstance(seed, int), "scheme.seed", "expected an integer")
    return AnScheme(strength=strength, seed=seed)


def scenario_from_dict(doc: dict) -> Scenario:
    """Validate a parsed config document and assemble the Scenario."""
    _expect(isinstance(doc, dict), "$", "config root must be an object")
    version = doc.get("spec_version", SPEC_VERSION)
    _expect(version == SPEC_VERSION, "spec_version", f"unsupported version {version!r}")

    ofdm_raw = {**DEFAULT_OFDM, **doc.get("ofdm", {})}
    num_sc = ofdm_raw["num_subcarriers"]
    _expect(isinstance(num_sc, int) and not isinstance(num_sc, bool) and num_sc >= 1,
            "ofdm.num_subcarriers", "expected an integer >= 1")
    try:
        cfg = OfdmConfig(
            num_subcarriers=num_sc,
            bandwidth=_num(ofdm_raw["bandwidth_hz"], "ofdm.bandwidth_hz", positive=True),
            carrier_freq=_num(ofdm_raw["carrier_hz"], "ofdm.carrier_hz", positive=True),
            tx_power=dbm_to_watt(_num(ofdm_raw["tx_power_dbm"], "ofdm.tx_power_dbm")),
            noise_psd=dbm_to_watt(_num(ofdm_raw["noise_psd_dbm_hz"], "ofdm.noise_psd_dbm_hz")),
            cp_duration=(_num(ofdm_raw["cp_duration_s"], "ofdm.cp_duration_s", positive=True)
                         if "cp_duration_s" in ofdm_raw else None),
        )
    except ValidationError as exc:
        raise SchemaError("ofdm", str(exc)) from exc

    sc_raw = doc.get("scenario", {})
    alice = _point_list([sc_raw.get("alice_m", list(DEFAULT_ALICE))], "scenario.alice_m")[0]
    bobs = _point_list(sc_raw.get("bobs_m", [list(p) for p in DEFAULT_BOBS]), "scenario.bobs_m")
    eves = _point_list(sc_raw.get("eves_m", [list(p) for p in DEFAULT_EVES]), "scenario.eves_m")
    anchors = [Anchor(position=np.array(p), role=ROLE_LEGIT, name=f"bob{i}") for i, p in enumerate(bobs)]
    anchors += [Anchor(position=np.array(p), role=ROLE_EVE, name=f"eve{i}") for i, p in enumerate(eves)]

    scheme = _build_scheme(doc.get("scheme", {}), cfg.bandwidth)
    box_raw = sc_raw.get("seed_box_m", [[0.0, 200.0], [0.0, 200.0]])
    box = tuple((_num(lo, "scenario.seed_box_m"), _num(hi, "scenario.seed_box_m"))
                for lo, hi in box_raw)
    return Scenario(
        alice_position=np.array(alice),
        anchors=tuple(anchors),
        config=cfg,
        scheme=scheme,
        gain_calibration=_num(sc_raw.get("gain_calibration", 1.0), "scenario.gain_calibration",
                              positive=True),
        an_search_lobes=_num(sc_raw.get("an_search_lobes", 24.0), "scenario.an_search_lobes",
                             positive=True),
        seed_box=box,
    )


def load_scenario(path: str) -> Scenario:
    """Parse and validate a config file; omitted fields take the defaults."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError("$", f"invalid JSON: {exc}") from exc
    return scenario_from_dict(doc)


def default_scenario(**overrides) -> Scenario:
    """The default test scene, optionally with replaced Scenario fields."""
    scenario = scenario_from_dict({})
    return replace(scenario, **overrides) if overrides else scenario


def run_bounds(scenario: Scenario, b_mode: str = MODE_PAPER_LITERAL):
    """Two-stage pipeline: per-anchor delay reports plus the position bounds.

    Eve anchors get the full mismatch treatment; legitimate anchors
    contribute the known-pilot position CRB. Deterministic given the
    scenario (the AN realization seed is part of the scheme).
    """
    eves = scenario.eves
    if not eves:
        raise ValidationError("mismatch analysis needs at least one eavesdropper anchor")
    c = scenario.speed_of_light
    p_true = scenario.alice_position
    reports: List[DelayMismatchReport] = []
    eve_reports: List[DelayMismatchReport] = []
    for idx, anchor in enumerate(scenario.anchors):
        tau = float(np.linalg.norm(p_true - anchor.position) / c)
        rep = delay_report(scenario, idx, tau)
        reports.append(rep)
        if anchor.role == ROLE_EVE:
            eve_reports.append(rep)

    if len(eves) < p_true.size:
        raise ValidationError(
            f"position bounds need at least {p_true.size} Eves, got {len(eves)}"
        )
    eve_positions = np.stack([a.position for a in eves])
    tau_bar = np.array([r.tau0 for r in eve_reports])
    cov = DelayCovariances(
        mcrb=np.array([r.mcrb for r in eve_reports]),
        crb=np.array([r.crb for r in eve_reports]),
    )
    p_bar, runner_up = pseudo_true_position(
        eve_positions, tau_bar, weights=cov.mcrb, seed_box=scenario.seed_box,
        c=c, prefer=p_true,
    )
    gf = generalized_fims(p_bar, eve_positions, true_delays(p_true, eve_positions, c),
                          cov, mode=b_mode, c=c)
    mcrb_matrix = mcrb_position(gf)

    bobs = scenario.bobs
    crb_legit = float("nan")
    if len(bobs) >= p_true.size:
        pilot = scenario.pilot()
        xi_b = np.array([crb_delay_pilot(scenario.config, pilot, scenario.anchor_gain(a))
                         for a in bobs])
        bob_positions = np.stack([a.position for a in bobs])
        crb_legit = float(np.sqrt(np.trace(crb_position(p_true, bob_positions, xi_b, c))))

    pos = lb_position(p_true, p_bar, mcrb_matrix, crb_legit_rmse=crb_legit,
                      runner_up_position=runner_up)
    return reports, pos


@dataclass(frozen=True)
class SweepSpec:
    """One figure-preset (or custom) sweep over the base scenario."""

    preset: str
    base_scenario: Scenario
    an_seed: int = 1
    b_mode: str = MODE_PAPER_LITERAL
    variable: Optional[str] = None       # custom sweeps only
    values: Optional[Sequence[float]] = None

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ValidationError(f"unknown preset {self.preset!r}")
        if self.preset == "custom":
            if not self.variable or self.values is None or len(self.values) == 0:
                raise ValidationError("custom sweeps need a variable and nonempty values")


@dataclass(frozen=True)
class SweepRow:
    """One scheme at one grid point, all error columns in meters."""

    preset: str
    scheme: str
    swept: Dict[str, float]
    crb_bob_m: float = float("nan")
    bias_eve_m: float = float("nan")
    mcrb_eve_m: float = float("nan")
    lb_eve_m: float = float("nan")
    an_seed: Optional[int] = None
    error: Optional[str] = None


def _evaluate(scenario: Scenario, preset: str, scheme_tag: str, swept: Dict, an_seed, b_mode) -> SweepRow:
    try:
        _, pos = run_bounds(scenario, b_mode=b_mode)
        return SweepRow(
            preset=preset, scheme=scheme_tag, swept=dict(swept),
            crb_bob_m=pos.crb_legit_rmse, bias_eve_m=pos.bias_norm,
            mcrb_eve_m=pos.mcrb_rmse, lb_eve_m=pos.rmse_lb, an_seed=an_seed,
        )
    except PilotveilError as exc:
        return SweepRow(preset=preset, scheme=scheme_tag, swept=dict(swept),
                        an_seed=an_seed, error=type(exc).__name__)


def run_sweep(spec: SweepSpec) -> List[SweepRow]:
    """Evaluate the preset grid; a failing grid point yields an error row."""
    base = spec.base_scenario
    W = base.config.bandwidth
    rows: List[SweepRow] = []

    if spec.preset == "fig2":
        for t in FIG2_T_VALUES:
            for L in FIG2_L_VALUES:
                sc = replace(base, scheme=AmScheme.from_decay(L, t, W))
                rows.append(_evaluate(sc, "fig2", "am", {"t": t, "L": L}, None, spec.b_mode))
        return rows

    if spec.preset == "fig3":
        for beta_db in FIG3_BETA_DB:
            for dn in FIG3_DELTA_NORM:
                swept = {"beta1_db": beta_db, "delta1_norm": dn}
                sc = replace(base, scheme=AmScheme(gains=(db_to_linear(beta_db),), delays=(dn / W,)))
                rows.append(_evaluate(sc, "fig3", "am", swept, None, spec.b_mode))
        return rows

    if spec.preset == "fig4":
        for beta_db in FIG4_BETA_DB:
            beta = db_to_linear(beta_db)
            am = replace(base, scheme=AmScheme(gains=(beta,), delays=(1.0 / W,)))
            rows.append(_evaluate(am, "fig4", "am", {"beta_db": beta_db}, None, spec.b_mode))
            an = replace(base, scheme=AnScheme(strength=beta, seed=spec.an_seed))
            rows.append(_evaluate(an, "fig4", "an", {"beta_db": beta_db}, spec.an_seed, spec.b_mode))
        return rows

    if spec.preset in ("fig5a", "fig5b"):
        beta = db_to_linear(10.0 if spec.preset == "fig5a" else 30.0)
        grid = FIG5A_P_DBM if spec.preset == "fig5a" else FIG5B_P_DBM
        for p_dbm in grid:
            cfg = replace(base.config, tx_power=dbm_to_watt(p_dbm))
            am = replace(base, config=cfg, scheme=AmScheme(gains=(beta,), delays=(1.0 / W,)))
            rows.append(_evaluate(am, spec.preset, "am", {"p_dbm": p_dbm}, None, spec.b_mode))
            an = replace(base, config=cfg, scheme=AnScheme(strength=beta, seed=spec.an_seed))
            rows.append(_evaluate(an, spec.preset, "an", {"p_dbm": p_dbm}, spec.an_seed, spec.b_mode))
        return rows

    # custom: one variable swept on top of the base scenario
    for value in spec.values:
        sc = _apply_custom(base, spec.variable, value, spec.an_seed)
        tag = sc.pilot().scheme_tag.lower()
        rows.append(_evaluate(sc, "custom", tag, {spec.variable: value},
                              spec.an_seed if tag == "an" else None, spec.b_mode))
    return rows


def _apply_custom(base: Scenario, variable: str, value: float, an_seed: int) -> Scenario:
    W = base.config.bandwidth
    if variable == "tx_power_dbm":
        return replace(base, config=replace(base.config, tx_power=dbm_to_watt(value)))
    if variable == "beta1_db":
        delays = base.scheme.delays if isinstance(base.scheme, AmScheme) else (1.0 / W,)
        return replace(base, scheme=AmScheme(gains=(db_to_linear(value),), delays=delays[:1]))
    if variable == "delta1_norm":
        gains = base.scheme.gains if isinstance(base.scheme, AmScheme) else (1.0,)
        return replace(base, scheme=AmScheme(gains=gains[:1], delays=(value / W,)))
    if variable == "an_strength_db":
        return replace(base, scheme=AnScheme(strength=db_to_linear(value), seed=an_seed))
    raise ValidationError(f"unknown custom sweep variable {variable!r}")


_VALUE_COLS = ("crb_bob_m", "bias_eve_m", "mcrb_eve_m", "lb_eve_m")
_WIDE_PRESETS = {"fig4": "beta_db", "fig5a": "p_dbm", "fig5b": "p_dbm"}


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    return format(x, ".12g")


def emit_csv(rows: Sequence[SweepRow], path: str) -> None:
    """Write the sweep as UTF-8 CSV, 12 significant digits, stable order.

    fig4/fig5 sweeps pivot to one row per grid value with the eight
    am_/an_ value columns matching the reference legend set; everything
    else is long format with one row per (scheme, grid point).
    """
    lines: List[str] = []
    if rows and rows[0].preset in _WIDE_PRESETS:
        preset = rows[0].preset
        key = _WIDE_PRESETS[preset]
        header = [key]
        header += [f"am_{c}" for c in _VALUE_COLS] + [f"an_{c}" for c in _VALUE_COLS]
        header += ["an_seed", "error"]
        lines.append(",".join(header))
        by_value: Dict[float, Dict[str, SweepRow]] = {}
        order = []
        for row in rows:
            v = row.swept[key]
            if v not in by_value:
                by_value[v] = {}
                order.append(v)
            by_value[v][row.scheme] = row
        for v in order:
            pair = by_value[v]
            cells = [_fmt(v)]
            for tag in ("am", "an"):
                row = pair.get(tag)
                cells += [_fmt(getattr(row, c)) if row else "" for c in _VALUE_COLS]
            an_row = pair.get("an")
            cells.append(_fmt(an_row.an_seed) if an_row else "")
            errs = ";".join(f"{t}:{r.error}" for t, r in pair.items() if r.error)
            cells.append(errs)
            lines.append(",".join(cells))
    else:
        swept_keys = list(rows[0].swept.keys()) if rows else []
        header = ["preset", "scheme"] + swept_keys + list(_VALUE_COLS) + ["an_seed", "error"]
        lines.append(",".join(header))
        for row in rows:
            cells = [row.preset, row.scheme]
            cells += [_fmt(row.swept[k]) for k in swept_keys]
            cells += [_fmt(getattr(row, c)) for c in _VALUE_COLS]
            cells.append(_fmt(row.an_seed))
            cells.append(row.error or "")
            lines.append(",".join(cells))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
