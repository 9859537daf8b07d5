"""Granular balls: the summarisation unit behind skeleton clustering.

A ball groups point indices and carries its arithmetic-mean center, the
max member distance to that center (radius), a radius-smoothed
distribution measure, and a set-level density.  ``generate_balls`` turns
a point matrix into a partition of such balls in two stages: quality
driven splitting first, then a radius-outlier refinement pass.
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass

import numpy as np
import scipy.sparse

from .exceptions import IndivisibleBallError

#: Smoothing constant in the distribution measure 1 / (r + TAU).  This is
#: data-unit sensitive; rescale wildly-ranged inputs (see README).
TAU = 0.01

#: Sentinel for "no limit" wherever a ball-count budget is accepted.
UNLIMITED = None

_SPLIT_RESTARTS = 3
_LLOYD_MAX_ITER = 100
_LLOYD_REL_TOL = 1e-6
_LLOYD_SWEEPS = 2
_COMMIT_SWEEPS = 1
_REJECT_RETRIES = 3


@dataclass(slots=True)
class GranularBall:
    """One ball: member indices into a point view plus summary statistics.

    ``density`` depends on the median radius of the surrounding ball set
    and is therefore filled later by :func:`compute_set_density`.
    """

    members: np.ndarray
    center: np.ndarray
    radius: float
    dm: float
    density: float | None = None

    @property
    def member_count(self) -> int:
        return int(self.members.size)


@dataclass
class BallSet:
    """A list of balls partitioning one point view, plus radius statistics.

    ``mean_radius`` / ``median_radius`` describe the final ball list (the
    median feeds the density formula).  The ``stage1_*`` fields record
    the statistics the refinement threshold was derived from; they exist
    for diagnostics and invariant checks.
    """

    balls: list[GranularBall]
    mean_radius: float
    median_radius: float
    source_point_count: int
    stage1_mean_radius: float
    stage1_median_radius: float

    def __len__(self) -> int:
        return len(self.balls)

    def centers_matrix(self) -> np.ndarray:
        return np.stack([b.center for b in self.balls])

    def densities_vector(self) -> np.ndarray:
        out = np.empty(len(self.balls))
        for i, b in enumerate(self.balls):
            if b.density is None:
                raise ValueError("ball densities have not been computed")
            out[i] = b.density
        return out

    def radii_vector(self) -> np.ndarray:
        return np.array([b.radius for b in self.balls])


@dataclass
class SplitDecision:
    """Diagnostic record of one stage-1 split decision (for tests/logging)."""

    accepted: bool
    parent_dm: float
    wdm: float


def _make_ball(members: np.ndarray, pts: np.ndarray) -> GranularBall:
    center = pts.mean(axis=0)
    radius = float(np.sqrt(((pts - center) ** 2).sum(axis=1).max()))
    return GranularBall(members=members, center=center, radius=radius,
                        dm=1.0 / (radius + TAU))


#: Inputs of at most this many points are treated as prototype
#: collections rather than samples of a density; see _split_improves.
_PROTOTYPE_SET_LIMIT = 32


def build_ball(points: np.ndarray, members) -> GranularBall:
    """Summarise ``points[members]`` into a ball (density left unset)."""
    members = np.asarray(members, dtype=np.intp)
    if members.size == 0:
        raise ValueError("a granular ball needs at least one member")
    return _make_ball(members, points[members])


def wdm(parent: GranularBall, left: GranularBall, right: GranularBall) -> float:
    """Member-weighted mean of the children's distribution measures."""
    n = parent.member_count
    if left.member_count + right.member_count != n:
        raise ValueError(
            f"children hold {left.member_count}+{right.member_count} members, "
            f"parent holds {n}")
    return (left.member_count * left.dm + right.member_count * right.dm) / n


def _split_improves(points: np.ndarray, parent: GranularBall,
                    left: GranularBall, right: GranularBall) -> bool:
    """Decide whether a bisection is kept.

    The measure comparison is always required: the member-weighted mean
    of the children's dm values must reach the parent's own.  That
    comparison alone cannot end the recursion, because a singleton child
    has radius zero and therefore a dm at the 1/TAU ceiling, which
    outvotes everything else; every set would dissolve into single
    points, and single points carry density zero, which starves the
    density-peak stage downstream.

    So for a population-scale input the split must also leave both
    children with at least two members.  Recursion then bottoms out at
    balls of two or three points, fine enough to trace any structure
    but every one still carrying a usable density.  An input of at most
    32 points is a different situation: that is not a sample of a
    density but a small collection of prototypes (for instance the
    pooled representatives of a single sample), and for those the
    measure comparison stands alone, so genuinely distinct prototypes
    come apart all the way down to single points.
    """
    return bool(_accept_mask(points.shape[0] <= _PROTOTYPE_SET_LIMIT,
                             parent.dm, wdm(parent, left, right),
                             left.member_count, right.member_count))


def _accept_mask(prototype, parent_dm, wdm_vals, left_counts, right_counts):
    """Vectorised form of the acceptance rule in :func:`_split_improves`.

    ``prototype`` flags inputs in the prototype regime (at most
    :data:`_PROTOTYPE_SET_LIMIT` points), where the occupancy condition
    is waived; it may be a scalar or a per-ball array.
    """
    ok = wdm_vals >= parent_dm
    return ok & (prototype | ((left_counts >= 2) & (right_counts >= 2)))


def bisect(points: np.ndarray, ball: GranularBall,
           rng: np.random.Generator) -> tuple[GranularBall, GranularBall]:
    """Split a ball into two nonempty children with seeded 2-means.

    Raises :class:`IndivisibleBallError` for terminal balls (fewer than
    two members, or all members identical); callers must not split those.
    """
    if ball.member_count < 2:
        raise IndivisibleBallError("terminal ball: fewer than two members")
    pts = points[ball.members]
    mask = _two_means_split(pts, rng)
    if mask is None:
        raise IndivisibleBallError("terminal ball: all member points are identical")
    return (_make_ball(ball.members[mask], pts[mask]),
            _make_ball(ball.members[~mask], pts[~mask]))


def _two_means_split(pts: np.ndarray, rng: np.random.Generator) -> np.ndarray | None:
    """Best-of-restarts 2-means partition mask, or None if indivisible."""
    n = pts.shape[0]
    if n < 2 or not np.any(pts != pts[0]):
        return None
    if n == 2:
        return np.array([True, False])

    pts_sq = np.einsum("ij,ij->i", pts, pts)
    pts_sum = pts.sum(axis=0)
    best_mask = None
    best_sse = np.inf
    for _ in range(_SPLIT_RESTARTS):
        mask, sse = _two_means_once(pts, pts_sq, pts_sum, rng)
        if mask is not None and sse < best_sse:
            best_sse = sse
            best_mask = mask
        if best_sse == 0.0:
            break
    if best_mask is None:
        # Every restart collapsed to an empty child; fall back to cutting
        # at the median of the highest-variance axis.
        best_mask = _median_axis_split(pts)
    return best_mask


def _converged(new: np.ndarray, old: np.ndarray) -> bool:
    shift_sq = float(((new - old) ** 2).sum())
    tol = _LLOYD_REL_TOL * (1.0 + math.sqrt(float(old @ old)))
    return shift_sq <= tol * tol


def _two_means_once(pts: np.ndarray, pts_sq: np.ndarray, pts_sum: np.ndarray,
                    rng: np.random.Generator):
    n = pts.shape[0]
    c0 = pts[rng.integers(n)]
    d2 = pts_sq - 2.0 * (pts @ c0) + float(c0 @ c0)
    np.maximum(d2, 0.0, out=d2)
    total = d2.sum()
    if total == 0.0:
        return None, np.inf
    centers = np.stack([c0, pts[rng.choice(n, p=d2 / total)]])

    for _ in range(_LLOYD_MAX_ITER):
        d = pts_sq[:, None] - 2.0 * (pts @ centers.T)
        d += np.einsum("ij,ij->i", centers, centers)
        left = d[:, 0] <= d[:, 1]  # ties go to the first center
        nl = int(left.sum())
        if nl == 0 or nl == n:
            return None, np.inf
        left_sum = pts.T @ left.astype(np.float64)
        new = np.stack([left_sum / nl, (pts_sum - left_sum) / (n - nl)])
        done = _converged(new[0], centers[0]) and _converged(new[1], centers[1])
        centers = new
        if done:
            break

    d = pts_sq[:, None] - 2.0 * (pts @ centers.T)
    d += np.einsum("ij,ij->i", centers, centers)
    np.maximum(d, 0.0, out=d)
    left = d[:, 0] <= d[:, 1]
    nl = int(left.sum())
    if nl == 0 or nl == n:
        return None, np.inf
    sse = float(np.where(left, d[:, 0], d[:, 1]).sum())
    return left, sse


def _median_axis_split(pts: np.ndarray) -> np.ndarray:
    axis = int(pts.var(axis=0).argmax())
    vals = pts[:, axis]
    order = np.argsort(vals, kind="stable")
    sorted_vals = vals[order]
    # Valid cut positions are where the sorted value changes; pick the one
    # closest to the middle.  The chosen axis has positive variance, so at
    # least one such position exists.
    cuts = np.flatnonzero(sorted_vals[1:] != sorted_vals[:-1]) + 1
    cut = int(cuts[np.abs(cuts - pts.shape[0] / 2.0).argmin()])
    mask = np.zeros(pts.shape[0], dtype=bool)
    mask[order[:cut]] = True
    return mask


def _try_split(points: np.ndarray, ball: GranularBall, rng: np.random.Generator):
    """Like :func:`bisect` but returns None instead of raising on terminals."""
    if ball.member_count < 2:
        return None
    pts = points[ball.members]
    mask = _two_means_split(pts, rng)
    if mask is None:
        return None
    return (_make_ball(ball.members[mask], pts[mask]),
            _make_ball(ball.members[~mask], pts[~mask]))


def _batched_two_means(P: np.ndarray, W: np.ndarray, starts: np.ndarray,
                       sizes: np.ndarray, bid: np.ndarray,
                       rng: np.random.Generator):
    """Best-of-restarts 2-means cut for every contiguous segment at once.

    ``P`` holds the points of all segments back to back (``W`` is the
    same buffer in single precision); ``starts`` and ``sizes`` delimit
    them and ``bid`` maps each row to its segment.  Returns ``(side,
    splittable, c0, c1, nl)``: a per-row boolean (True = first child), a
    per-segment split flag, the two per-segment side means consistent
    with ``side``, and the per-segment first-side row count.  Segments
    whose rows are all identical are unsplittable; segments where every
    seeded restart collapsed to an empty side fall back to a median cut
    on their widest axis.

    Each restart runs a fixed number of assignment sweeps rather than
    iterating to a tolerance, and everything works in single precision:
    the outputs only steer splitting decisions, and the caller measures
    exact statistics for whatever it finalizes.
    """
    m = P.shape[0]
    E = sizes.size
    R = _SPLIT_RESTARTS
    ends = starts + sizes

    first = P[starts[bid]]
    splittable = ~np.logical_and.reduceat((P == first).all(axis=1), starts)

    pts_sq = np.einsum("ij,ij->i", W, W)
    sq_seg = np.add.reduceat(pts_sq, starts)
    sizes_f = sizes.astype(np.float32)

    # Seeding: one uniform member as the first center, a second member
    # drawn with probability proportional to squared distance from it.
    u0 = rng.random((R, E))
    u1 = rng.random((R, E))
    c0_idx = starts[None, :] + (u0 * sizes[None, :]).astype(np.intp)
    C0 = W[c0_idx]
    c0sq = np.einsum("red,red->re", C0, C0)
    cross = np.einsum("rid,id->ri", C0[:, bid, :], W)
    d2 = pts_sq[None, :] - 2.0 * cross + c0sq[:, bid]
    np.maximum(d2, 0.0, out=d2)
    T = np.add.reduceat(d2, starts, axis=1)
    cum = np.cumsum(d2, axis=1)
    before = np.zeros((R, E), dtype=np.float32)
    if E > 1:
        before[:, 1:] = cum[:, starts[1:] - 1]
    thresh = before + u1.astype(np.float32) * T
    c1_idx = np.empty((R, E), dtype=np.intp)
    for r in range(R):
        c1_idx[r] = np.searchsorted(cum[r], thresh[r], side="right")
    np.clip(c1_idx, starts[None, :], ends[None, :] - 1, out=c1_idx)
    C1 = W[c1_idx]

    # A restart dies when either side of its cut comes up empty; the
    # selection below never picks a dead one.
    alive = splittable[None, :] & (T > 0.0)
    SL = np.empty((R, E, P.shape[1]), dtype=np.float32)
    # Rows-are-segments matrix; with the side mask as data, one product
    # per restart yields every first-child coordinate sum at once.  The
    # matrix is built once and its data vector swapped per use.
    idx_t = np.int32 if m <= np.iinfo(np.int32).max else np.int64
    picks = scipy.sparse.csr_matrix(
        (np.ones(m, dtype=np.float32), np.arange(m, dtype=idx_t),
         np.append(starts, m).astype(idx_t)), shape=(E, m))
    S_f = picks @ W

    # A few sweeps for every restart, then commit per segment to the
    # most promising one and refine it alone for the remaining sweeps.
    side = np.zeros((R, m), dtype=bool)
    nlr = np.zeros((R, E), dtype=np.float32)
    for _ in range(_COMMIT_SWEEPS):
        c0sq = np.einsum("red,red->re", C0, C0)
        c1sq = np.einsum("red,red->re", C1, C1)
        # Only the sign of the distance difference matters for the
        # assignment, and that reduces to one projection per row.
        proj = np.einsum("rid,id->ri", (C1 - C0)[:, bid, :], W)
        side = 2.0 * proj <= (c1sq - c0sq)[:, bid]  # ties go to the first center
        sidef = side.astype(np.float32)
        nlr = np.add.reduceat(sidef, starts, axis=1)
        alive &= (nlr > 0.0) & (nlr < sizes_f[None, :])
        for r in range(R):
            picks.data = sidef[r]
            SL[r] = picks @ W
        C0 = SL / np.maximum(nlr, 1.0)[:, :, None]
        C1 = (S_f[None] - SL) / np.maximum(sizes_f[None, :] - nlr, 1.0)[:, :, None]

    # C0/C1 are the means of ``side``, so the within-side scatter
    # follows from sums of squares alone; it only ranks restarts, so
    # the cancellation error at f32 scale is fine.
    sse = (sq_seg[None, :]
           - nlr * np.einsum("red,red->re", C0, C0)
           - (sizes_f[None, :] - nlr) * np.einsum("red,red->re", C1, C1))
    sse[~alive] = np.inf
    best = np.argmin(sse, axis=0)
    seg_ids = np.arange(E)
    have = alive[best, seg_ids]
    side_best = side[best[bid], np.arange(m)]
    c0 = C0[best, seg_ids]
    c1 = C1[best, seg_ids]
    nl = nlr[best, seg_ids]

    for _ in range(_LLOYD_SWEEPS - _COMMIT_SWEEPS):
        csq = np.einsum("ed,ed->e", c1, c1) - np.einsum("ed,ed->e", c0, c0)
        proj1 = np.einsum("id,id->i", (c1 - c0)[bid], W)
        side_best = 2.0 * proj1 <= csq[bid]
        sidef1 = side_best.astype(np.float32)
        nl = np.add.reduceat(sidef1, starts)
        have &= (nl > 0.0) & (nl < sizes_f)
        picks.data = sidef1
        sl = picks @ W
        c0 = sl / np.maximum(nl, 1.0)[:, None]
        c1 = (S_f - sl) / np.maximum(sizes_f - nl, 1.0)[:, None]

    for e in np.flatnonzero(splittable & ~have):
        seg = slice(starts[e], ends[e])
        mask = _median_axis_split(P[seg])
        side_best[seg] = mask
        wseg = W[seg]
        c0[e] = wseg[mask].mean(axis=0)
        c1[e] = wseg[~mask].mean(axis=0)
        nl[e] = float(mask.sum())
    return side_best, splittable, c0, c1, nl


def _split_forest(P: np.ndarray, group_sizes: np.ndarray, max_balls: int | None,
                  min_balls: int | None, rng: np.random.Generator,
                  decision_log: list[SplitDecision] | None) -> list[list[GranularBall]]:
    """Quality-driven breadth-first splitting, one tree level per pass.

    ``P`` stacks one or more point groups back to back; every group is
    an independent splitting root with its own ball budget and regime.
    The result is equivalent to bisecting balls one at a time off a FIFO
    queue per group, but every ball on a tree level, across all groups,
    goes through the same few vectorised operations, so the interpreter
    cost per level is constant instead of per ball.  Points of the balls
    still in play sit grouped by ball in one permuted buffer, which
    turns per-ball reductions into contiguous-segment reductions.

    ``min_balls`` guards against an unlucky cut stranding a group: while
    a group's partition is smaller than the floor, a quality-rejected
    cut does not finalize the ball but sends it to the next pass, where
    it is re-cut with fresh seeding (at most :data:`_REJECT_RETRIES`
    times per ball).  A group may still end below the floor when its
    points cannot support more balls.

    Returns the finalized balls of each group, members indexed into the
    group's own point view.
    """
    ngroups = group_sizes.size
    bounded = max_balls is not UNLIMITED
    proto_g = group_sizes <= _PROTOTYPE_SET_LIMIT
    # At population scale a ball of three or fewer members cannot pass the
    # minimum-child-occupancy rule, so splitting it is never attempted.
    term_g = np.where(proto_g, 1, 3)
    goff = np.zeros(ngroups, dtype=np.intp)
    np.cumsum(group_sizes[:-1], out=goff[1:])

    grp = np.arange(ngroups, dtype=np.intp)
    sizes = group_sizes.astype(np.intp)
    root_bid = np.repeat(grp, sizes)
    # Row identities carried through every shuffle, already group-local.
    # Narrow indices keep the per-level gathers cheap.
    idx_t = np.int32 if P.shape[0] <= np.iinfo(np.int32).max else np.intp
    perm = (np.arange(P.shape[0], dtype=np.intp)
            - goff[root_bid]).astype(idx_t, copy=False)
    centers = np.add.reduceat(P, goff, axis=0) / sizes[:, None]
    spread = P - centers[root_bid]
    radii = np.sqrt(np.maximum(
        np.maximum.reduceat(np.einsum("ij,ij->i", spread, spread), goff), 0.0))
    dms = 1.0 / (radii + TAU)
    tries = np.zeros(ngroups, dtype=np.intp)

    out: list[list[GranularBall]] = [[] for _ in range(ngroups)]
    # Per group: finalized + pending, what the partition holds if we stop now.
    counts = np.ones(ngroups, dtype=np.intp)
    # Single-precision copy of P, carried through the same row shuffles.
    W = P.astype(np.float32)

    def finalize(which, starts):
        # Member slices are views; the buffer they point into is
        # replaced wholesale between levels, never written in place.
        # Centers and radii are re-measured in double precision here
        # because the level bookkeeping carries single-precision values
        # that only steer splitting.
        if which.size == 0:
            return
        sz = sizes[which]
        off = np.cumsum(sz) - sz
        rows = np.repeat(starts[which] - off, sz) + np.arange(int(sz.sum()))
        sub = P[rows]
        cen = np.add.reduceat(sub, off, axis=0) / sz[:, None]
        diff = sub - np.repeat(cen, sz, axis=0)
        d2 = np.einsum("ij,ij->i", diff, diff)
        r64 = np.sqrt(np.maximum(np.maximum.reduceat(d2, off), 0.0))
        r_list = r64.tolist()
        dm_list = (1.0 / (r64 + TAU)).tolist()
        for i, e in enumerate(which):
            out[grp[e]].append(GranularBall(
                members=perm[starts[e]:starts[e] + sizes[e]],
                center=cen[i],
                radius=r_list[i], dm=dm_list[i]))

    while sizes.size:
        starts = np.zeros(sizes.size, dtype=np.intp)
        np.cumsum(sizes[:-1], out=starts[1:])
        in_play = sizes > term_g[grp]
        if bounded:
            in_play &= counts[grp] < max_balls
        if not in_play.all():
            finalize(np.flatnonzero(~in_play), starts)
            keep_pt = np.repeat(in_play, sizes)
            P = P[keep_pt]
            W = W[keep_pt]
            perm = perm[keep_pt]
            sizes = sizes[in_play]
            centers = centers[in_play]
            radii = radii[in_play]
            dms = dms[in_play]
            grp = grp[in_play]
            tries = tries[in_play]
            if sizes.size == 0:
                break
            starts = np.zeros(sizes.size, dtype=np.intp)
            np.cumsum(sizes[:-1], out=starts[1:])
        E = sizes.size
        bid = np.repeat(np.arange(E, dtype=np.int32), sizes)
        side, splittable, CL, CR, nlf = _batched_two_means(
            P, W, starts, sizes, bid, rng)
        nl = nlf.astype(np.intp)
        nr = sizes - nl

        # Child stats in single precision: they only feed the quality
        # rule and the next level's parent stats, and finalize() measures
        # exact values for whatever survives.
        own = np.where(side[:, None], CL[bid], CR[bid])
        diff32 = W - own
        dist = np.einsum("ij,ij->i", diff32, diff32)
        neg = np.float32(-np.inf)
        rL = np.sqrt(np.maximum(
            np.maximum.reduceat(np.where(side, dist, neg), starts),
            0.0)).astype(np.float64)
        rR = np.sqrt(np.maximum(
            np.maximum.reduceat(np.where(side, neg, dist), starts),
            0.0)).astype(np.float64)
        dmL = 1.0 / (rL + TAU)
        dmR = 1.0 / (rR + TAU)
        wdm_v = (nl * dmL + nr * dmR) / sizes
        accept = splittable & _accept_mask(proto_g[grp], dms, wdm_v, nl, nr)

        # The sequential rule is: walk balls in order, finalize when the
        # group budget is full, otherwise split on accept.  Whether ball
        # e gets through depends only on how many earlier accepts its
        # group saw, so the walk collapses to a per-group running count.
        acc_cum = np.cumsum(accept) - accept
        first_of_grp = np.searchsorted(grp, grp)
        seen = counts[grp] + (acc_cum - acc_cum[first_of_grp])
        budget_ok = seen < max_balls if bounded else np.ones(E, dtype=bool)
        eff = accept & budget_ok
        # Quality rejects are retried while the group partition sits
        # below the floor; everything else rejected here is final.
        if min_balls is None:
            retry = np.zeros(E, dtype=bool)
        else:
            retry = (splittable & budget_ok & ~accept
                     & (seen < min_balls) & (tries < _REJECT_RETRIES))
        counts += np.bincount(grp[eff], minlength=ngroups).astype(np.intp)

        if decision_log is not None:
            for e in np.flatnonzero(splittable & budget_ok):
                decision_log.append(SplitDecision(
                    bool(accept[e]), float(dms[e]), float(wdm_v[e])))
        finalize(np.flatnonzero(~eff & ~retry), starts)

        # Next level holds two reordered children per split ball and the
        # retried balls unchanged.
        child_mult = eff * 2 + retry
        child_base = np.cumsum(child_mult) - child_mult
        total = int(child_base[-1] + child_mult[-1]) if E else 0
        nb_row = child_base[bid] + (eff[bid] & ~side)
        keep_idx = np.flatnonzero(child_mult[bid] > 0)
        sel = keep_idx[np.argsort(nb_row[keep_idx], kind="stable")]
        P = P[sel]
        W = W[sel]
        perm = perm[sel]

        spl = np.flatnonzero(eff)
        ret = np.flatnonzero(retry)
        pos = child_base[spl]
        new_sizes = np.empty(total, dtype=np.intp)
        new_centers = np.empty((total, P.shape[1]))
        new_radii = np.empty(total)
        new_dms = np.empty(total)
        new_grp = np.empty(total, dtype=np.intp)
        new_tries = np.zeros(total, dtype=np.intp)
        new_sizes[pos] = nl[spl]
        new_sizes[pos + 1] = nr[spl]
        new_centers[pos] = CL[spl]
        new_centers[pos + 1] = CR[spl]
        new_radii[pos] = rL[spl]
        new_radii[pos + 1] = rR[spl]
        new_dms[pos] = dmL[spl]
        new_dms[pos + 1] = dmR[spl]
        new_grp[pos] = grp[spl]
        new_grp[pos + 1] = grp[spl]
        rpos = child_base[ret]
        new_sizes[rpos] = sizes[ret]
        new_centers[rpos] = centers[ret]
        new_radii[rpos] = radii[ret]
        new_dms[rpos] = dms[ret]
        new_grp[rpos] = grp[ret]
        new_tries[rpos] = tries[ret] + 1
        sizes, centers, radii, dms, grp, tries = (
            new_sizes, new_centers, new_radii, new_dms, new_grp, new_tries)
    return out


def compute_set_density(ball_set: BallSet) -> BallSet:
    """Fill densities: member count over (radius + set median radius).

    Single-member balls get density 0.  When radius and median radius are
    both zero (all-duplicate degenerate sets) the denominator falls back
    to the smoothing constant so densities stay finite and still rank by
    member count.
    """
    med = ball_set.median_radius
    t = len(ball_set)
    counts = np.fromiter((b.member_count for b in ball_set.balls), float, t)
    denom = ball_set.radii_vector() + med
    denom[denom == 0.0] = TAU
    dens = np.where(counts == 1.0, 0.0, counts / denom)
    for ball, d in zip(ball_set.balls, dens):
        ball.density = float(d)
    return ball_set


def generate_balls(points: np.ndarray, max_balls: int | None = UNLIMITED,
                   rng: np.random.Generator | None = None,
                   decision_log: list[SplitDecision] | None = None,
                   min_balls: int | None = None) -> BallSet:
    """Partition a point view into granular balls, two stages deep.

    Stage one splits breadth-first from the whole-set ball: each ball in
    play is bisected, the split is kept when :func:`_split_improves`
    accepts it, otherwise the ball is finalized.  With a bounded
    ``max_balls`` splitting stops as soon as the prospective ball count
    (finalized plus pending) reaches the budget, and pending balls are
    kept unsplit so the partition survives.

    Stage two computes the mean and median radius of the stage-one output
    once, then keeps bisecting any ball whose radius is at least twice
    the larger of the two, without recomputing the threshold.  Indivisible
    balls stay as they are.

    Densities are filled over the final ball list before returning.

    Parameters
    ----------
    points : (n, d) array
        The point view to partition.  Member indices refer to rows here.
    max_balls : int or None
        Ball budget for stage one; None (``UNLIMITED``) disables it.
    rng : numpy Generator, optional
        Source of splitter randomness; a fresh unseeded generator is used
        when omitted.
    decision_log : list, optional
        When given, receives a :class:`SplitDecision` per stage-1 decision.
    min_balls : int, optional
        Partition-size floor.  While the partition is smaller than this,
        a quality-rejected cut is redrawn with fresh seeding (a bounded
        number of times) instead of finalizing the ball.  Callers that
        must pick a fixed number of representatives from the result use
        this to survive the occasional bad cut near the root.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValueError("points must be a nonempty 2-D matrix")
    max_balls = _check_max_balls(max_balls)
    min_balls = _check_min_balls(min_balls, max_balls)
    if rng is None:
        rng = np.random.default_rng()

    sizes = np.array([points.shape[0]], dtype=np.intp)
    finalized = _split_forest(points, sizes, max_balls, min_balls, rng,
                              decision_log)[0]
    return _finish_set(points, finalized, rng)


def generate_balls_grouped(point_groups, max_balls: int | None = UNLIMITED,
                           rng: np.random.Generator | None = None,
                           min_balls: int | None = None) -> list[BallSet]:
    """Partition several point views at once, one :class:`BallSet` each.

    Each view gets the same treatment as a :func:`generate_balls` call
    with the shared generator, including its own ``max_balls`` budget
    and ``min_balls`` floor; only the order of random draws differs,
    because the stage-one splitting of all views advances
    level-synchronously through one fused buffer.  That makes the
    vectorised splitting cost per tree level independent of the number
    of views, which is what keeps the per-sample stage of the pipeline
    cheap next to the labeling pass.
    """
    groups = [np.ascontiguousarray(g, dtype=np.float64) for g in point_groups]
    if not groups:
        return []
    for g in groups:
        if g.ndim != 2 or g.shape[0] == 0:
            raise ValueError("every point group must be a nonempty 2-D matrix")
        if g.shape[1] != groups[0].shape[1]:
            raise ValueError("point groups must share a dimension")
    max_balls = _check_max_balls(max_balls)
    min_balls = _check_min_balls(min_balls, max_balls)
    if rng is None:
        rng = np.random.default_rng()

    sizes = np.array([g.shape[0] for g in groups], dtype=np.intp)
    per_group = _split_forest(np.vstack(groups), sizes, max_balls, min_balls,
                              rng, None)
    return [_finish_set(g, finalized, rng)
            for g, finalized in zip(groups, per_group)]


def _check_max_balls(max_balls):
    if max_balls is not UNLIMITED:
        if max_balls < 1:
            raise ValueError(f"max_balls must be >= 1 or UNLIMITED, got {max_balls}")
        max_balls = int(max_balls)
    return max_balls


def _check_min_balls(min_balls, max_balls):
    if min_balls is None:
        return None
    min_balls = int(min_balls)
    if min_balls < 1:
        raise ValueError(f"min_balls must be >= 1, got {min_balls}")
    if max_balls is not UNLIMITED and min_balls > max_balls:
        raise ValueError(
            f"min_balls ({min_balls}) cannot exceed max_balls ({max_balls})")
    return min_balls


def _finish_set(points: np.ndarray, finalized: list[GranularBall],
                rng: np.random.Generator) -> BallSet:
    """Stage-two refinement and set assembly over stage-one output."""
    radii = np.array([b.radius for b in finalized])
    stage1_mean = float(radii.mean())
    stage1_median = float(np.median(radii))
    threshold = 2.0 * max(stage1_mean, stage1_median)

    if float(radii.max()) < threshold:
        # Common case: nothing to refine, the stage-one stats stand.
        final = list(finalized)
        mean_radius, median_radius = stage1_mean, stage1_median
    else:
        refine: deque[GranularBall] = deque(finalized)
        final = []
        while refine:
            gb = refine.popleft()
            if gb.radius >= threshold:
                children = _try_split(points, gb, rng)
                if children is not None:
                    refine.append(children[0])
                    refine.append(children[1])
                    continue
            final.append(gb)
        radii = np.array([b.radius for b in final])
        mean_radius = float(radii.mean())
        median_radius = float(np.median(radii))

    ball_set = BallSet(
        balls=final,
        mean_radius=mean_radius,
        median_radius=median_radius,
        source_point_count=points.shape[0],
        stage1_mean_radius=stage1_mean,
        stage1_median_radius=stage1_median,
    )
    return compute_set_density(ball_set)


def dump_balls_csv(ball_set: BallSet, path) -> None:
    """Write one row per ball: id, center coordinates, radius, density, members."""
    dim = ball_set.balls[0].center.shape[0] if ball_set.balls else 0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ball_id"] + [f"c{i}" for i in range(dim)]
                        + ["radius", "density", "member_count"])
        for i, b in enumerate(ball_set.balls):
            writer.writerow([i] + [repr(float(x)) for x in b.center]
                            + [repr(b.radius), repr(b.density), b.member_count])
