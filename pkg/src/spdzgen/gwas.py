"""Genomic case/control matching on secret shares.

The case owner holds an orthonormal basis U of its genotype space and the
case genotype counts; the control owner holds candidate control vectors with
their counts.  A control z is accepted when its residual against the case
basis is small, ||z - U U^T z||^2 <= tau^2, computed on shares through the
algebraic identity ||z||^2 - ||U^T z||^2 (valid for orthonormal columns, and
far cheaper than materializing the projector).  Accepted controls are then
screened by the inflation factor

    lambda = (4 n0 n2 - n1^2) / ((n1 + 2 n2)(n1 + 2 n0))

over the combined case + accepted-control genotype table; lambda near 0
means the Hardy-Weinberg equilibrium roughly holds.  The secure variant
multiplies both sides of the ratio by a joint blind factor before opening
them to the control owner only, which leaves the ratio unchanged.
"""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass, field
from fractions import Fraction

from . import btg, fixpt, modmath, spdz
from .btg import BtgRole
from .dispense import TripleDispenser
from .errors import (
    DegenerateTableError,
    ParameterError,
    ParseError,
    ShapeError,
    ValidationError,
)
from .fixpt import FixedPointParams, TruncRoles
from .modmath import GroupParams, signed_decode
from .net import PartyId, Runtime
from .spdz import SharedValue, TripleLedger

REF = "ref"
ALT = "alt"

# Bound on any single genotype count entering the secure lambda protocol;
# keeps |blind * numerator| < p/2 for 256-bit groups (see BLIND_BOUND).
COUNT_CAP = 2 ** 20
BLIND_BOUND = 2 ** 32


def encode_genotype(pair) -> int:
    """(Ref,Ref) -> 0, mixed pair -> 1, (Alt,Alt) -> 2."""
    try:
        first, second = pair
    except (TypeError, ValueError):
        raise ParseError("allele pair must have two entries: %r" % (pair,))
    alleles = []
    for sym in (first, second):
        norm = str(sym).strip().lower()
        if norm not in (REF, ALT):
            raise ParseError("unknown allele symbol %r" % (sym,))
        alleles.append(norm)
    return alleles.count(ALT)


def counts_of(values) -> tuple:
    """Genotype tallies (count of 0s, 1s, 2s) of a value sequence."""
    tally = [0, 0, 0]
    for v in values:
        if v not in (0, 1, 2):
            raise ParseError("genotype value %r outside {0, 1, 2}" % (v,))
        tally[v] += 1
    return tuple(tally)


@dataclass(frozen=True)
class GenotypeMatrix:
    entries: tuple  # rows of tuples, each value in {0, 1, 2}

    def __post_init__(self):
        for row in self.entries:
            counts_of(row)  # validates values

    @property
    def samples(self) -> int:
        return len(self.entries)

    @property
    def snps(self) -> int:
        return len(self.entries[0]) if self.entries else 0

    def counts(self) -> tuple:
        return counts_of(v for row in self.entries for v in row)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["snp_%d" % j for j in range(self.snps)])
            writer.writerows(self.entries)

    @classmethod
    def from_csv(cls, path) -> "GenotypeMatrix":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise ParseError("empty genotype file %s" % path)
        try:
            entries = tuple(tuple(int(v) for v in row) for row in rows[1:] if row)
        except ValueError as exc:
            raise ParseError("non-integer genotype entry in %s: %s" % (path, exc))
        return cls(entries=entries)


def synth_genotypes(n_samples: int, n_snps: int, allele_freqs, seed) -> GenotypeMatrix:
    """Hardy-Weinberg sampling: per-SNP probabilities ((1-q)^2, 2q(1-q), q^2)."""
    if isinstance(allele_freqs, (int, float)):
        allele_freqs = [float(allele_freqs)] * n_snps
    freqs = list(allele_freqs)
    if len(freqs) != n_snps:
        raise ParameterError("need one allele frequency per SNP")
    for q in freqs:
        if not 0.0 < q < 1.0:
            raise ParameterError("allele frequency %r outside (0, 1)" % q)
    rng = random.Random(seed)
    rows = []
    for _ in range(n_samples):
        row = []
        for q in freqs:
            x = rng.random()
            if x < (1 - q) ** 2:
                row.append(0)
            elif x < (1 - q) ** 2 + 2 * q * (1 - q):
                row.append(1)
            else:
                row.append(2)
        rows.append(tuple(row))
    return GenotypeMatrix(entries=tuple(rows))


@dataclass(frozen=True)
class ContingencyCounts:
    r0: int
    r1: int
    r2: int
    s0: int
    s1: int
    s2: int

    def n(self, i: int) -> int:
        return (self.r0, self.r1, self.r2)[i] + (self.s0, self.s1, self.s2)[i]

    @property
    def R(self) -> int:
        return self.r0 + self.r1 + self.r2

    @property
    def S(self) -> int:
        return self.s0 + self.s1 + self.s2

    @property
    def N(self) -> int:
        return self.R + self.S


def inflation_factor_plain(counts: ContingencyCounts) -> Fraction:
    """lambda = (4 n0 n2 - n1^2) / ((n1 + 2 n2)(n1 + 2 n0)), exact."""
    n0, n1, n2 = counts.n(0), counts.n(1), counts.n(2)
    den = (n1 + 2 * n2) * (n1 + 2 * n0)
    if den == 0:
        raise DegenerateTableError("inflation-factor denominator is zero")
    return Fraction(4 * n0 * n2 - n1 * n1, den)


@dataclass(frozen=True)
class CaseBasis:
    """Orthonormal-column basis, dim rows by rank columns."""

    rows: tuple  # tuple of tuples of Fraction

    @property
    def dim(self) -> int:
        return len(self.rows)

    @property
    def rank(self) -> int:
        return len(self.rows[0]) if self.rows else 0

    def column(self, j: int) -> list:
        return [row[j] for row in self.rows]

    def validate_orthonormal(self, params: FixedPointParams):
        """U^T U must be the identity, entry-wise within 2^(2-f)."""
        tol = Fraction(4, 2 ** params.f)
        for i in range(self.rank):
            for j in range(self.rank):
                dot = sum(row[i] * row[j] for row in self.rows)
                want = 1 if i == j else 0
                if abs(dot - want) > tol:
                    raise ValidationError(
                        "basis columns %d,%d not orthonormal (dot=%s)" % (i, j, float(dot)))
        return self

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            for row in self.rows:
                writer.writerow(["%.12f" % float(v) for v in row])

    @classmethod
    def from_csv(cls, path) -> "CaseBasis":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        try:
            parsed = tuple(tuple(Fraction(v) for v in row) for row in rows if row)
        except ValueError as exc:
            raise ParseError("bad basis entry in %s: %s" % (path, exc))
        widths = {len(r) for r in parsed}
        if len(widths) > 1:
            raise ParseError("ragged basis rows in %s" % path)
        return cls(rows=parsed)


def orthonormal_columns(vectors) -> CaseBasis:
    """Gram-Schmidt over the given vectors; independent ones span the basis."""
    import numpy as np

    mat = np.array([[float(v) for v in vec] for vec in vectors], dtype=float).T
    q_mat, r_mat = np.linalg.qr(mat)
    keep = [j for j in range(r_mat.shape[0]) if abs(r_mat[j, j]) > 1e-9]
    cols = q_mat[:, keep]
    rows = tuple(tuple(Fraction(x).limit_denominator(10 ** 12) for x in row) for row in cols)
    return CaseBasis(rows=rows)


# --- plaintext oracle ------------------------------------------------------

def plain_residual_norm_sq(basis: CaseBasis, z) -> float:
    zf = [float(v) for v in z]
    zz = sum(v * v for v in zf)
    proj = 0.0
    for j in range(basis.rank):
        col = [float(v) for v in basis.column(j)]
        d = sum(c * v for c, v in zip(col, zf))
        proj += d * d
    return zz - proj


@dataclass(frozen=True)
class ControlRecord:
    control_id: str
    vector: tuple  # entries as Fraction (genotype values for CSV inputs)
    counts: tuple  # (s0, s1, s2)

    @classmethod
    def from_genotype_row(cls, control_id, row) -> "ControlRecord":
        return cls(control_id=control_id, vector=tuple(Fraction(v) for v in row),
                   counts=counts_of(row))


@dataclass(frozen=True)
class PipelineConfig:
    tau: Fraction = Fraction(3, 10)
    lambda_max: Fraction = Fraction(1, 20)
    accept_small: bool = True  # accept when residual <= tau; flag flips it
    guard_bits: int = 8
    fp: FixedPointParams = field(default_factory=FixedPointParams)
    parties: int = 3

    def __post_init__(self):
        if self.tau <= 0 or self.lambda_max <= 0:
            raise ValidationError("tau and lambda_max must be positive")
        if self.parties < 3:
            raise ValidationError("need at least 3 MPC parties")

    def echo(self) -> dict:
        return {
            "tau": float(self.tau),
            "lambda_max": float(self.lambda_max),
            "accept_small": self.accept_small,
            "guard_bits": self.guard_bits,
            "parties": self.parties,
            "fixed_point": {"k": self.fp.k, "f": self.fp.f,
                            "kappa": self.fp.kappa, "p": str(self.fp.p)},
        }


def _accepts(residual_sq_exceeds_tau: bool, config: PipelineConfig) -> bool:
    return (not residual_sq_exceeds_tau) if config.accept_small else residual_sq_exceeds_tau


def plain_filter_controls(basis: CaseBasis, case_counts, controls,
                          config: PipelineConfig) -> dict:
    """The pipeline decision logic without any cryptography."""
    tau_sq = float(config.tau) ** 2
    accepted = []
    for ctrl in controls:
        res = plain_residual_norm_sq(basis, ctrl.vector)
        if _accepts(res > tau_sq, config):
            accepted.append(ctrl)
    lam = _combined_lambda(case_counts, accepted)
    return {
        "accepted": sorted(c.control_id for c in accepted),
        "lambda": lam,
        "lambda_ok": lam <= config.lambda_max,
    }


def _combined_lambda(case_counts, accepted_controls) -> Fraction:
    s = [0, 0, 0]
    for ctrl in accepted_controls:
        for i in range(3):
            s[i] += ctrl.counts[i]
    table = ContingencyCounts(r0=case_counts[0], r1=case_counts[1], r2=case_counts[2],
                              s0=s[0], s1=s[1], s2=s[2])
    return inflation_factor_plain(table)


# --- secure protocols ------------------------------------------------------

def _sample_bounded_residue(params: GroupParams, rng: random.Random) -> int:
    """Blind factor in [1, BLIND_BOUND] that is also a subgroup member."""
    while True:
        r = rng.randrange(1, BLIND_BOUND + 1)
        if modmath.is_subgroup_member(r, params):
            return r


def secure_inflation_factor(runtime: Runtime, group: GroupParams, case_counts,
                            ctrl_counts, mpc_pids, o_case: PartyId, o_ctrl: PartyId,
                            leader: PartyId, dispenser: TripleDispenser,
                            ledger: TripleLedger, owner_keys: dict) -> Fraction:
    """Blinded inflation factor, revealed to the control owner only.

    Each owner shares only its own counts; the combined-table sums n_i form by
    local addition.  Numerator and denominator are built with Beaver products,
    both multiplied by a joint blind R = r_case * r_ctrl produced by a triple
    session among the two owners and the leader, and the blinded pair is
    opened to o_ctrl, who takes their exact ratio (R cancels).
    """
    p = group.p
    for v in tuple(case_counts) + tuple(ctrl_counts):
        if not 0 <= v <= COUNT_CAP:
            raise ValidationError("count %d outside [0, %d]" % (v, COUNT_CAP))

    r_sh = [spdz.share_secret(runtime, o_case, v, mpc_pids, p) for v in case_counts]
    s_sh = [spdz.share_secret(runtime, o_ctrl, v, mpc_pids, p) for v in ctrl_counts]
    n_sh = [spdz.add_local(r_sh[i], s_sh[i], p) for i in range(3)]

    lhs = spdz.add_local(n_sh[1], spdz.scale_local(2, n_sh[2], p), p)
    rhs = spdz.add_local(n_sh[1], spdz.scale_local(2, n_sh[0], p), p)
    triples = [dispenser.next_triple() for _ in range(3)]
    prods = fixpt.beaver_mult_batch(
        runtime, [(n_sh[0], n_sh[2]), (n_sh[1], n_sh[1]), (lhs, rhs)], triples, p, ledger)
    num = spdz.sub_local(spdz.scale_local(4, prods[0], p), prods[1], p)
    den = prods[2]

    r_case = _sample_bounded_residue(group, runtime.rng(o_case))
    r_ctrl = _sample_bounded_residue(group, runtime.rng(o_ctrl))
    blind_session = btg.run_triple_session(
        runtime, group,
        keys={BtgRole.A: owner_keys[o_case], BtgRole.B: owner_keys.get(o_ctrl),
              BtgRole.C: owner_keys[leader]},
        pids={BtgRole.A: o_case, BtgRole.B: o_ctrl, BtgRole.C: leader},
        forced={BtgRole.A: r_case, BtgRole.B: r_ctrl},
    )
    blind = blind_session.secret(BtgRole.C)
    blind_sh = spdz.share_secret(runtime, leader, blind, mpc_pids, p)

    triples2 = [dispenser.next_triple() for _ in range(2)]
    blinded = fixpt.beaver_mult_batch(
        runtime, [(blind_sh, num), (blind_sh, den)], triples2, p, ledger)
    opened = spdz.open_values(runtime, blinded, p, collector=o_ctrl, recipients=[o_ctrl])
    num_i, den_i = signed_decode(opened[0], p), signed_decode(opened[1], p)
    if den_i == 0:
        raise DegenerateTableError("blinded denominator opened to zero")
    return Fraction(num_i, den_i)


def share_vector(runtime: Runtime, owner: PartyId, values, mpc_pids,
                 params: FixedPointParams) -> list:
    """Owner fp-encodes and shares every entry of a vector."""
    return [spdz.share_secret(runtime, owner, fixpt.fp_encode(v, params), mpc_pids, params.p)
            for v in values]


def residual_norm_sq(runtime: Runtime, basis_cols, z_shares,
                     params: FixedPointParams, dispenser: TripleDispenser,
                     ledger: TripleLedger, roles: TruncRoles) -> SharedValue:
    """Shares of ||z||^2 - ||U^T z||^2 via inner products on shares."""
    for col in basis_cols:
        if len(col) != len(z_shares):
            raise ShapeError("basis column length %d != vector length %d"
                             % (len(col), len(z_shares)))
    dim = len(z_shares)
    zz = fixpt.fp_inner(runtime, z_shares, z_shares,
                        [dispenser.next_triple() for _ in range(dim)],
                        params, ledger, roles)
    acc = zz
    for col in basis_cols:
        proj = fixpt.fp_inner(runtime, col, z_shares,
                              [dispenser.next_triple() for _ in range(dim)],
                              params, ledger, roles)
        sq = fixpt.fp_mult(runtime, proj, proj, dispenser.next_triple(),
                           params, ledger, roles)
        acc = spdz.sub_local(acc, sq, params.p)
    return acc


def secure_accept_bit(runtime: Runtime, res_sq: SharedValue, config: PipelineConfig,
                      roles: TruncRoles) -> bool:
    """Open the comparison bit: residual^2 greater than tau^2, or not."""
    params = config.fp
    tau_sq_enc = signed_decode(fixpt.fp_encode(config.tau * config.tau, params), params.p)
    diff = spdz.add_const(spdz.scale_local(-1, res_sq, params.p), tau_sq_enc, params.p)
    bit = fixpt.ltz(runtime, diff, params, roles, guard_bits=config.guard_bits)
    exceeded = spdz.open_value(runtime, bit, params.p) == 1
    return _accepts(exceeded, config)


@dataclass
class PipelineParties:
    """Identity wiring for one runtime segment of the pipeline."""

    group: GroupParams
    runtime: Runtime
    btg_pids: dict
    btg_keys: dict
    mpc_pids: list
    o_case: PartyId
    o_ctrl: PartyId
    leader: PartyId
    owner_keys: dict
    dispenser: TripleDispenser
    ledger: TripleLedger
    roles: TruncRoles


def build_parties(group: GroupParams, seed, parties: int = 3, record: bool = False,
                  scheduler: str = "round-robin", blinding: str = "single",
                  ledger_path=None) -> PipelineParties:
    """Spawn BTG trio plus m MPC servers and wire the default role bindings."""
    btg_pids = {BtgRole.A: PartyId("BTG_A"), BtgRole.B: PartyId("BTG_B"),
                BtgRole.C: PartyId("BTG_C")}
    mpc_pids = [PartyId("MPC", i) for i in range(1, parties + 1)]
    runtime = Runtime(list(btg_pids.values()) + mpc_pids, seed=seed,
                      scheduler=scheduler, record=record)
    btg_keys = {role: btg.keygen(group, runtime.rng(pid)) for role, pid in btg_pids.items()}
    o_case, o_ctrl = mpc_pids[0], mpc_pids[1]
    owner_keys = {pid: btg.keygen(group, runtime.rng(pid)) for pid in mpc_pids}
    dispenser = TripleDispenser(runtime, group, btg_pids, btg_keys, mpc_pids,
                                ox=o_case, oy=o_ctrl, mode=blinding,
                                owner_keys=owner_keys, ledger_path=ledger_path)
    roles = TruncRoles(mask_owner=o_case, wide_owner=o_ctrl, opener=dispenser.leader)
    return PipelineParties(group=group, runtime=runtime, btg_pids=btg_pids,
                           btg_keys=btg_keys, mpc_pids=mpc_pids, o_case=o_case,
                           o_ctrl=o_ctrl, leader=dispenser.leader,
                           owner_keys=owner_keys, dispenser=dispenser,
                           ledger=TripleLedger(), roles=roles)


def _filter_segment(ctx: PipelineParties, basis: CaseBasis, controls,
                    config: PipelineConfig) -> dict:
    """Residual-check a batch of controls on one runtime; returns decisions."""
    params = config.fp
    basis_cols = [share_vector(ctx.runtime, ctx.o_case, basis.column(j),
                               ctx.mpc_pids, params) for j in range(basis.rank)]
    decisions = {}
    for ctrl in controls:
        z_shares = share_vector(ctx.runtime, ctx.o_ctrl, ctrl.vector, ctx.mpc_pids, params)
        res = residual_norm_sq(ctx.runtime, basis_cols, z_shares, params,
                               ctx.dispenser, ctx.ledger, ctx.roles)
        decisions[ctrl.control_id] = secure_accept_bit(ctx.runtime, res, config, ctx.roles)
    return decisions


def filter_controls(group: GroupParams, basis: CaseBasis, case_counts, controls,
                    config: PipelineConfig, seed, record: bool = False,
                    parallel: int = 1, ledger_path=None,
                    contexts_out: list | None = None) -> dict:
    """End-to-end secure filter: residual screening, then the lambda check.

    With parallel > 1 the control batch is split across that many independent
    runtime segments (disjoint triples, seeds derived per segment); decisions
    are exact, so the report does not depend on the segmentation.
    """
    if config.fp.p != group.p:
        raise ValidationError(
            "fixed-point field (%d) must be the triple field (%d): dispensed "
            "triples only multiply shares in their own field" % (config.fp.p, group.p))
    basis.validate_orthonormal(config.fp)
    for ctrl in controls:
        if len(ctrl.vector) != basis.dim:
            raise ShapeError("control %s has dimension %d, basis expects %d"
                             % (ctrl.control_id, len(ctrl.vector), basis.dim))

    segments = max(1, min(parallel, len(controls) or 1))
    chunks = [list(controls)[i::segments] for i in range(segments)]
    contexts = [build_parties(group, seed=(repr(seed), "segment", i),
                              parties=config.parties, record=record,
                              ledger_path=ledger_path)
                for i in range(segments)]
    decisions: dict[str, bool] = {}
    if segments == 1:
        decisions.update(_filter_segment(contexts[0], basis, chunks[0], config))
    else:
        import concurrent.futures

        with concurrent.futures.ThreadPoolExecutor(max_workers=segments) as pool:
            futures = [pool.submit(_filter_segment, ctx, basis, chunk, config)
                       for ctx, chunk in zip(contexts, chunks)]
            for fut in futures:
                decisions.update(fut.result())

    accepted = [c for c in controls if decisions[c.control_id]]
    ctrl_totals = tuple(sum(c.counts[i] for c in accepted) for i in range(3))
    lam_ctx = contexts[0]
    lam = secure_inflation_factor(lam_ctx.runtime, group, tuple(case_counts),
                                  ctrl_totals, lam_ctx.mpc_pids, lam_ctx.o_case,
                                  lam_ctx.o_ctrl, lam_ctx.leader, lam_ctx.dispenser,
                                  lam_ctx.ledger, lam_ctx.owner_keys)
    if contexts_out is not None:
        contexts_out.extend(contexts)
    return {
        "accepted": sorted(cid for cid, ok in decisions.items() if ok),
        "lambda": lam,
        "lambda_ok": lam <= config.lambda_max,
        "triple_count": sum(ctx.dispenser.count for ctx in contexts),
    }
