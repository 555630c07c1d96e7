"""Experiment configuration: INI sections parsed into solver objects.

Every referenced kind (integrand, datum, family) is looked up in an explicit
registry; unknown or missing fields raise ConfigError naming the field.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass

import numpy as np

from .energy import (
    CheckerboardCoefficient,
    ConstantMatrixCoefficient,
    laplace_integrand,
    meyers_integrand,
    ppower_integrand,
    quadratic_integrand,
)
from .errors import ConfigError
from .geometry import Domain, Grid
from .search import (
    boundary_debond_family,
    circles_family,
    concat_families,
    segments_family,
)
from .singularity import meyers_profile

DATUM_KINDS = ("constant", "linear_x", "linear_y", "affine", "meyers_trace")
INTEGRAND_KINDS = ("ppower", "quadratic", "meyers", "laplace")
FAMILY_KINDS = ("segments", "circles", "boundary_debond")


@dataclass
class ExperimentConfig:
    """Parsed INI config; build_* methods construct the solver objects."""

    parser: configparser.ConfigParser
    path: str

    # --- raw access ----------------------------------------------------------

    def has(self, section, option=None):
        if option is None:
            return self.parser.has_section(section)
        return self.parser.has_option(section, option)

    def get(self, section, option, default=None, required=False):
        if not self.parser.has_option(section, option):
            if required:
                raise ConfigError("missing required option", section, option)
            return default
        return self.parser.get(section, option)

    def get_float(self, section, option, default=None, required=False):
        raw = self.get(section, option, None, required)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"not a number: {raw!r}", section, option) from None

    def get_int(self, section, option, default=None, required=False):
        raw = self.get(section, option, None, required)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"not an integer: {raw!r}", section, option) from None

    def get_floats(self, section, option, default=None, required=False):
        raw = self.get(section, option, None, required)
        if raw is None:
            return default
        try:
            return [float(tok) for tok in raw.replace(",", " ").split()]
        except ValueError:
            raise ConfigError(f"not a number list: {raw!r}", section, option) from None

    def get_ints(self, section, option, default=None, required=False):
        vals = self.get_floats(section, option, None, required)
        if vals is None:
            return default
        return [int(v) for v in vals]

    # --- builders -------------------------------------------------------------

    def build_domain(self) -> Domain:
        rect = self.get_floats("domain", "rect", required=True)
        if len(rect) != 4:
            raise ConfigError("rect needs 4 numbers: x0 y0 x1 y1", "domain", "rect")
        dirichlet = self.get("domain", "dirichlet", "all")
        spec = "all" if dirichlet.strip() == "all" else dirichlet.split()
        try:
            return Domain.rectangle(*rect, dirichlet=spec)
        except ValueError as exc:
            raise ConfigError(str(exc), "domain", "dirichlet") from None

    def build_grid(self, domain=None) -> Grid:
        domain = domain or self.build_domain()
        n = self.get_int("grid", "n", required=True)
        ny = self.get_int("grid", "ny", None)
        try:
            return Grid(domain, n, ny)
        except ValueError as exc:
            raise ConfigError(str(exc), "grid", "n") from None

    def build_integrand(self):
        kind = self.get("integrand", "kind", required=True)
        if kind not in INTEGRAND_KINDS:
            raise ConfigError(f"unknown kind {kind!r} (choose from {INTEGRAND_KINDS})",
                              "integrand", "kind")
        if kind == "laplace":
            return laplace_integrand()
        if kind == "meyers":
            K = self.get_float("integrand", "K", required=True)
            orientation = self.get("integrand", "orientation", "radial_stiff")
            try:
                return meyers_integrand(K, orientation)
            except ValueError as exc:
                raise ConfigError(str(exc), "integrand", "orientation") from None
        if kind == "ppower":
            p = self.get_float("integrand", "p", required=True)
            coeff_kind = self.get("integrand", "coefficient", "constant")
            if coeff_kind == "constant":
                coeff = self.get_float("integrand", "value", 1.0)
            elif coeff_kind == "checkerboard":
                vals = self.get_floats("integrand", "values", required=True)
                if len(vals) != 2:
                    raise ConfigError("checkerboard needs 2 values", "integrand", "values")
                block = self.get_float("integrand", "block", required=True)
                coeff = CheckerboardCoefficient(vals[0], vals[1], block)
            else:
                raise ConfigError(f"unknown coefficient {coeff_kind!r}",
                                  "integrand", "coefficient")
            try:
                return ppower_integrand(p, coeff)
            except ValueError as exc:
                raise ConfigError(str(exc), "integrand", "p") from None
        # quadratic: constant matrix entries, or the radially anisotropic field
        coeff_kind = self.get("integrand", "coefficient", "constant")
        if coeff_kind == "meyers":
            K = self.get_float("integrand", "K", required=True)
            orientation = self.get("integrand", "orientation", "radial_stiff")
            try:
                return meyers_integrand(K, orientation)
            except ValueError as exc:
                raise ConfigError(str(exc), "integrand", "orientation") from None
        entries = self.get_floats("integrand", "matrix", required=True)
        if len(entries) not in (2, 3):
            raise ConfigError("matrix needs a11 a22 [a12]", "integrand", "matrix")
        a12 = entries[2] if len(entries) == 3 else 0.0
        try:
            return quadratic_integrand(ConstantMatrixCoefficient(entries[0], entries[1], a12))
        except ValueError as exc:
            raise ConfigError(str(exc), "integrand", "matrix") from None

    def build_datum(self):
        kind = self.get("datum", "kind", required=True)
        scale = self.get_float("datum", "scale", 1.0)
        if kind == "constant":
            value = self.get_float("datum", "value", required=True)
            return lambda x, y: np.full_like(np.asarray(x, dtype=float), value)
        if kind == "linear_x":
            return lambda x, y: scale * np.asarray(x, dtype=float)
        if kind == "linear_y":
            return lambda x, y: scale * np.asarray(y, dtype=float)
        if kind == "affine":
            a = self.get_float("datum", "a", 0.0)
            bx = self.get_float("datum", "bx", 0.0)
            by = self.get_float("datum", "by", 0.0)
            return lambda x, y: a + bx * np.asarray(x, dtype=float) + by * np.asarray(y, dtype=float)
        if kind == "meyers_trace":
            K = self.get_float("datum", "K", required=True)
            orientation = self.get("datum", "orientation", "radial_stiff")
            base = meyers_profile(K, orientation)
            return lambda x, y: scale * base(x, y)
        raise ConfigError(f"unknown kind {kind!r} (choose from {DATUM_KINDS})",
                          "datum", "kind")

    def build_family(self, grid: Grid):
        kinds = self.get("family", "kind", required=True).split("+")
        fams = []
        for kind in kinds:
            kind = kind.strip()
            if kind == "segments":
                stride = self.get_int("family", "stride", max(1, grid.nx // 16))
                lengths = self.get_ints("family", "lengths", required=True)
                orientations = tuple(self.get("family", "orientations", "h v").split())
                fams.append(segments_family(grid, stride, lengths, orientations))
            elif kind == "circles":
                center = self.get_floats("family", "center", required=True)
                radii = self.get_floats("family", "radii", required=True)
                fams.append(circles_family(grid, center, radii))
            elif kind == "boundary_debond":
                spans = self.get_ints("family", "spans", [grid.nx])
                fams.append(boundary_debond_family(grid, spans))
            else:
                raise ConfigError(f"unknown kind {kind!r} (choose from {FAMILY_KINDS})",
                                  "family", "kind")
        return fams[0] if len(fams) == 1 else concat_families(*fams)

    # --- run-level options ------------------------------------------------------

    def seed(self, override=None):
        if override is not None:
            return int(override)
        return self.get_int("run", "seed", 0)

    def workers(self, override=None):
        if override is not None:
            return int(override)
        return self.get_int("run", "workers", 1)

    def out_dir(self, override=None):
        return override or self.get("run", "out", "out")

    def tol(self):
        return self.get_float("run", "tol", 1e-10)

    def toughness(self):
        return self.get_float("run", "toughness", 1.0)


def load_config(path) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path!r}")
    return ExperimentConfig(parser, str(path))
