"""Coproduct, cut maps and the forest algebra.

Tensor sums are plain dicts mapping (left, right-forest) pairs to exact
coefficients.  The left slot holds a Tree for the coproduct of a single tree
and a forest (tuple of planted trees) once a renormalization operator has been
applied.  Forests are ordered tuples; the empty tuple is the algebra unit.
"""

from __future__ import annotations

from typing import Dict, Optional, Tuple

from .symtree import (
    EDGE_I, EDGE_IM, EDGE_IP, GEN, ONE, PLANTED, PROD, XI,
    Tree, I, Im, Ip, X, canon, leq, prod3, sign_of, tree_name,
)

Forest = Tuple[Tree, ...]
UNIT: Forest = ()


def forest_m_xi(f: Forest) -> int:
    return sum(t.m_xi for t in f)


def forest_m_one(f: Forest) -> int:
    return sum(t.m_one for t in f)


def forest_m_x(f: Forest) -> int:
    return sum(t.m_x for t in f)


def forest_key(f: Forest) -> Tuple[int, ...]:
    """Multiset normal form under forest commutativity."""
    return tuple(sorted(t.uid for t in f))


def _add(acc: dict, key, coeff) -> None:
    c = acc.get(key)
    c = coeff if c is None else c + coeff
    if c:
        acc[key] = c
    elif key in acc:
        del acc[key]


class Coalgebra:
    """Coproduct machinery scoped to one TreeUniverse (delta fixed)."""

    def __init__(self, universe):
        self.u = universe
        self._delta: Dict[int, dict] = {}
        self._cplus: Dict[Tuple[int, int], Optional[Forest]] = {}
        self._cminus: Dict[Tuple[int, int], Optional[Forest]] = {}

    # -- coproduct ---------------------------------------------------------

    def delta(self, s: Tree) -> dict:
        out = self._delta.get(s.uid)
        if out is not None:
            return out
        u, dl = self.u, self.u.delta
        acc: dict = {}
        if s.kind == PLANTED:
            ch = s.child
            if s.edge == EDGE_I:
                if ch is ONE:
                    _add(acc, (s, (s,)), 1)
                elif ch.kind == GEN and ch.label == "X":
                    ip = Ip(ch.index, ch, dl)
                    _add(acc, (I(ONE), (s,)), 1)
                    _add(acc, (s, (ip,)), 1)
                elif u.member("W", ch):
                    _add(acc, (s, UNIT), 1)
                elif u.member("N_ring", ch):
                    _add(acc, (I(ONE), (s,)), 1)
                    for i in range(1, u.d + 1):
                        ip = Ip(i, ch, dl)
                        if ip is not None:
                            _add(acc, (I(X(i)), (ip,)), 1)
                    for (l, f), c in self.delta(ch).items():
                        _add(acc, (I(l), f), c)
                else:
                    raise ValueError("delta: %s outside domain" % tree_name(s))
            elif s.edge == EDGE_IP:
                if ch.kind == GEN:
                    _add(acc, (s, (s,)), 1)
                else:
                    _add(acc, (Ip(s.index, X(s.index), dl), (s,)), 1)
                    for (l, f), c in self.delta(ch).items():
                        ip = Ip(s.index, l, dl)
                        if ip is not None:
                            _add(acc, (ip, f), c)
            else:  # EDGE_IM
                for (l, f), c in self.delta(ch).items():
                    im = Im(s.index, l)
                    if im is not None:
                        _add(acc, (im, f), c)
                ip = Ip(s.index, ch, dl)
                if ip is not None:
                    _add(acc, (Ip(s.index, X(s.index), dl), (ip,)), 1)
        elif s.kind == PROD:
            if u.member("W", s):
                _add(acc, (s, UNIT), 1)
            else:
                d1, d2, d3 = (self.delta(k) for k in s.children)
                for (l1, f1), c1 in d1.items():
                    for (l2, f2), c2 in d2.items():
                        for (l3, f3), c3 in d3.items():
                            l = prod3(l1, l2, l3, dl)
                            if l is None:
                                continue
                            _add(acc, (l, f1 + f2 + f3), c1 * c2 * c3)
        elif s is XI:
            _add(acc, (s, UNIT), 1)
        else:
            raise ValueError("delta: %s outside domain" % tree_name(s))
        self._delta[s.uid] = acc
        return acc

    def delta_forest(self, forest: Forest) -> dict:
        acc = {(UNIT, UNIT): 1}
        for comp in forest:
            nxt: dict = {}
            for (l, f), c in self.delta(comp).items():
                for (fl, fr), c0 in acc.items():
                    _add(nxt, (fl + (l,), fr + f), c0 * c)
            acc = nxt
        return acc

    # -- cut maps ----------------------------------------------------------

    def cplus(self, tb: Tree, t: Tree) -> Optional[Forest]:
        key = (tb.uid, t.uid)
        if key in self._cplus:
            return self._cplus[key]
        out = self._cplus_eval(tb, t)
        self._cplus[key] = out
        return out

    def _cplus_eval(self, tb: Tree, t: Tree) -> Optional[Forest]:
        u, dl = self.u, self.u.delta
        if t is ONE:
            return (I(ONE),) if tb is ONE else None
        if t.kind == GEN and t.label == "X":
            if tb is ONE:
                return (I(t),)
            if tb.kind == GEN and tb.label == "X":
                ip = Ip(tb.index, t, dl)
                return (ip,) if ip is not None else None
            return None
        if t is XI:
            return UNIT if tb is XI else None
        # t is a product tree
        if tb is ONE:
            return (I(t),) if u.order(t) > -2 else None
        if tb.kind == GEN and tb.label == "X":
            ip = Ip(tb.index, t, dl)
            return (ip,) if ip is not None else None
        if tb is XI:
            return None
        if tb.kind != PROD:
            return None
        parts = []
        for kb, k in zip(tb.children, t.children):
            p = self.cplus(kb.child, k.child)
            if p is None:
                return None
            parts.append(p)
        return parts[0] + parts[1] + parts[2]

    def cminus(self, tb: Tree, t: Tree) -> Optional[Forest]:
        key = (tb.uid, t.uid)
        if key in self._cminus:
            return self._cminus[key]
        out = self._cminus_eval(tb, t)
        self._cminus[key] = out
        return out

    def _cminus_eval(self, tb: Tree, t: Tree) -> Optional[Forest]:
        if t is ONE:
            return (I(ONE),) if tb is ONE else None
        if t.kind == GEN and t.label == "X":
            if tb is ONE:
                return (I(t),)
            if tb.kind == GEN and tb.label == "X":
                im = Im(tb.index, t)
                return (im,) if im is not None else None
            return None
        if t is XI:
            if tb is ONE:
                return (I(XI),)
            if tb.kind == GEN and tb.label == "X":
                return (Im(tb.index, XI),)
            return UNIT if tb is XI else None
        if tb is ONE:
            return (I(t),)
        if tb.kind == GEN and tb.label == "X":
            return (Im(tb.index, t),)
        if tb is XI:
            return None
        if tb.kind != PROD:
            return None
        parts = []
        for kb, k in zip(tb.children, t.children):
            p = self.cminus(kb.child, k.child)
            if p is None:
                return None
            parts.append(p)
        return parts[0] + parts[1] + parts[2]

    # -- renormalization operator -------------------------------------------

    def renorm_expand(self, rmap: dict, tau: Tree) -> dict:
        """R(tau) = q_F(tau) + sum r(tau') C_-(tau', tau) as {forest: coeff}.

        rmap maps canonical uids to coefficients; it must vanish off Q.
        """
        acc: dict = {}
        _add(acc, tuple(tau.children), 1)
        for tq in self.u.Q:
            c = rmap.get(canon(tq).uid)
            if not c:
                continue
            f = self.cminus(tq, tau)
            if f is not None:
                _add(acc, f, c)
        return acc

    # -- verification scans --------------------------------------------------

    def verify_coassoc(self, trees=None) -> list:
        """(delta x id) delta == (id x delta) delta, exact."""
        report = []
        for s in (trees if trees is not None else self.u.T):
            lhs: dict = {}
            rhs: dict = {}
            for (l, f), c in self.delta(s).items():
                for (l2, f2), c2 in self.delta(l).items():
                    _add(lhs, (l2, f2, f), c * c2)
                for (f1, f2), c2 in self.delta_forest(f).items():
                    _add(rhs, (l, f1, f2), c * c2)
            report.append(_row("coassoc", s, lhs == rhs, lhs, rhs))
        return report

    def verify_explicit_formula(self, trees=None) -> list:
        """delta against the cut-map table, plus the leaf-count identities."""
        u = self.u
        report = []
        candidates = u.N + tuple(t for t in u.W)
        for t in (trees if trees is not None else candidates):
            rhs_planted: dict = {}
            for tb in candidates:
                f = self.cplus(tb, t)
                if f is None:
                    continue
                _add(rhs_planted, (I(tb), f), 1)
                ok = (
                    leq(tb, t)
                    and t.m_xi == tb.m_xi + forest_m_xi(f)
                    and tb.m_one + tb.m_x == len(f)
                    and t.m_one == forest_m_one(f)
                    and t.m_x == forest_m_x(f)
                    and u.order(tb) + sum(u.order(p) for p in f) == u.order(t)
                )
                report.append(_row("cut-counts", t, ok, tree_name(tb), f))
            lhs_planted = self.delta(I(t))
            report.append(_row("explicit-planted", t,
                               lhs_planted == rhs_planted, lhs_planted, rhs_planted))
            if u.member("T_r", t):
                # left factors of the unplanted coproduct live in T_r, so the
                # polynomial generators drop out of this sum
                rhs_flat = {}
                for tb in candidates:
                    if not u.member("T_r", tb):
                        continue
                    f = self.cplus(tb, t)
                    if f is not None:
                        _add(rhs_flat, (tb, f), 1)
                lhs_flat = self.delta(t)
                report.append(_row("explicit-unplanted", t,
                                   lhs_flat == rhs_flat, lhs_flat, rhs_flat))
        return report

    def verify_delta_ranges(self) -> list:
        u = self.u
        report = []
        checks = (("T_l", u.T_l), ("N_ring", u.N_ring), ("T_cen", u.T_cen))
        for name, trees in checks:
            for s in trees:
                ok = all(u.member(name, l) for (l, _f) in self.delta(s))
                report.append(_row("range-" + name, s, ok, None, None))
        return report

    def verify_renorm_commute(self, rmap: dict, trees=None) -> list:
        """delta R == (R x id) delta on product trees; compared after multiset
        normalization of forests (the raw ordered comparison is reported too).
        """
        u = self.u
        report = []
        pool = trees if trees is not None else tuple(
            t for t in u.T_r if t.kind == PROD)
        for t in pool:
            lhs: dict = {}
            for f, c in self.renorm_expand(rmap, t).items():
                for (fl, fr), c2 in self.delta_forest(f).items():
                    _add(lhs, (fl, fr), c * c2)
            rhs: dict = {}
            for (l, f), c in self.delta(t).items():
                for f2, c2 in self.renorm_expand(rmap, l).items():
                    _add(rhs, (f2, f), c * c2)
            ordered_equal = lhs == rhs
            norm_l: dict = {}
            norm_r: dict = {}
            for (fl, fr), c in lhs.items():
                _add(norm_l, (forest_key(fl), forest_key(fr)), c)
            for (fl, fr), c in rhs.items():
                _add(norm_r, (forest_key(fl), forest_key(fr)), c)
            row = _row("renorm-commute", t, norm_l == norm_r, lhs, rhs)
            row["ordered_equal"] = ordered_equal
            report.append(row)
        return report


def _row(identity: str, t: Tree, ok: bool, lhs, rhs) -> dict:
    row = {"identity": identity, "tree": tree_name(t),
           "status": "pass" if ok else "FAIL"}
    if not ok:
        row["lhs"] = _render(lhs)
        row["rhs"] = _render(rhs)
    return row


def _render(obj):
    if isinstance(obj, dict):
        parts = []
        for key, c in sorted(obj.items(), key=lambda kv: str(kv[0])):
            parts.append("%s * %s" % (c, _render_key(key)))
        return " + ".join(parts) if parts else "0"
    return str(obj)


def _render_key(key):
    if isinstance(key, tuple):
        return " (x) ".join(_render_factor(k) for k in key)
    return _render_factor(key)


def _render_factor(k):
    if isinstance(k, Tree):
        return tree_name(k)
    if isinstance(k, tuple):
        return "[" + " . ".join(
            tree_name(t) if isinstance(t, Tree) else str(t) for t in k) + "]" \
            if k else "1"
    return str(k)


def report_failures(report: list) -> list:
    return [row for row in report if row["status"] != "pass"]
