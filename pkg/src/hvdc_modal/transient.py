"""Time-domain simulation of the two-pole equivalent network.

The network is a netlist of series R-L branches (optionally mutually
coupled), node-to-ground capacitors and a switchable fault resistor.  It is
compiled to ``dx/dt = A x + B u`` with x = (branch currents, capacitor
voltages).  Nodes touched only by inductive branches impose KCL on the
currents; those constraints are removed by projecting onto their null
space, so the integrated state is minimal.  Integration is fixed-step
implicit trapezoidal.  Terminal voltages are evaluated from the
continuous-time model at each sample, so they do not ring after switching.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space, orth

from .errors import BuildError, SolverError
from .system import FaultKind, FaultScenario, SystemParams, Topology
from .traces import Trace

GROUND = "gnd"
POLES = (("p", 1.0), ("n", -1.0))


@dataclass(frozen=True)
class SimSettings:
    t_end: float = 10e-3
    dt: float = 2e-6
    stiff_sources: bool = False
    ptp_alpha: float = 0.5
    dc_ramp: float = 0.0
    ramp_time: float = 0.1
    preload_current: float = 0.0

    def __post_init__(self):
        if not (self.dt > 0 and self.t_end > 0):
            raise ValueError("dt and t_end must be > 0")
        if self.ptp_alpha <= 0:
            raise ValueError("ptp_alpha must be > 0")
        if self.ramp_time <= 0:
            raise ValueError("ramp_time must be > 0")
        if self.preload_current and not self.stiff_sources:
            raise ValueError("preload_current needs stiff_sources (no DC equilibrium otherwise)")


# -- netlist ----------------------------------------------------------------

@dataclass(frozen=True)
class Branch:
    name: str
    a: str
    b: str
    R: float
    L: float


@dataclass(frozen=True)
class Capacitor:
    name: str
    node: str
    C: float
    v0: float


@dataclass(frozen=True)
class FaultBranch:
    a: str
    b: str
    R: float


@dataclass
class Netlist:
    branches: list = field(default_factory=list)
    couplings: list = field(default_factory=list)   # (branch1, branch2, M)
    capacitors: list = field(default_factory=list)
    faults: list = field(default_factory=list)
    emfs: list = field(default_factory=list)        # (branch, volts at full profile)
    taps: dict = field(default_factory=dict)        # name -> [(kind, target, coeff)]

    def branch(self, name, a, b, R, L):
        if L <= 0:
            raise BuildError(f"branch {name} needs positive inductance")
        self.branches.append(Branch(name, a, b, R, L))

    def couple(self, b1, b2, M):
        if M:
            self.couplings.append((b1, b2, M))

    def inventory(self):
        return {
            "branches": len(self.branches),
            "capacitors": len(self.capacitors),
            "couplings": len(self.couplings),
            "faults": len(self.faults),
        }


class _Merge:
    def __init__(self):
        self.parent = {}

    def find(self, x):
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        # ground always stays the representative
        if rb == GROUND:
            ra, rb = rb, ra
        self.parent[rb] = ra


@dataclass(frozen=True)
class LinearSystem:
    """One switching configuration of the compiled network.

    ``A``/``B`` act on the reduced state z; ``T`` maps z to the physical
    state x = (branch currents, capacitor voltages).  Output taps are rows
    of ``C_out``/``D_out`` acting on (x, u).
    """

    A: np.ndarray
    B: np.ndarray
    T: np.ndarray
    A_full: np.ndarray
    B_full: np.ndarray
    C_out: np.ndarray
    D_out: np.ndarray
    tap_names: tuple
    n_branches: int
    pot_C: np.ndarray
    pot_D: np.ndarray
    resistors: tuple   # (row into pot (a), row (b) or None, R)

    @property
    def eigenvalues(self):
        return np.linalg.eigvals(self.A)


def _compile(net: Netlist, closed: bool, stiff: bool) -> LinearSystem:
    merge = _Merge()
    merge.find(GROUND)
    resistors = []
    if closed:
        for fb in net.faults:
            if fb.R == 0.0:
                merge.union(fb.a, fb.b)
            else:
                resistors.append(fb)

    br = net.branches
    nL = len(br)
    bidx = {b.name: k for k, b in enumerate(br)}
    nodes = set()
    for b in br:
        nodes.update((merge.find(b.a), merge.find(b.b)))
    for c in net.capacitors:
        nodes.add(merge.find(c.node))
    for r in resistors:
        nodes.update((merge.find(r.a), merge.find(r.b)))
    nodes.discard(GROUND)

    cap_nodes = {}
    for c in net.capacitors:
        n = merge.find(c.node)
        if n == GROUND:
            raise BuildError(f"capacitor {c.name} is shorted")
        if n in cap_nodes:
            raise BuildError(f"node {n} has more than one capacitor")
        cap_nodes[n] = c
    caps = [cap_nodes[n] for n in sorted(cap_nodes)]
    if stiff:
        src_nodes, state_caps = [merge.find(c.node) for c in caps], []
    else:
        src_nodes, state_caps = [], caps
    cap_node_names = [merge.find(c.node) for c in state_caps]
    free = sorted(n for n in nodes if n not in cap_nodes)
    nC, nF, nS, nE = len(state_caps), len(free), len(src_nodes), len(net.emfs)
    fidx = {n: k for k, n in enumerate(free)}
    cidx = {n: k for k, n in enumerate(cap_node_names)}
    sidx = {n: k for k, n in enumerate(src_nodes)}

    # incidence: +1 where current leaves the node through the branch
    K_f = np.zeros((nF, nL))
    K_c = np.zeros((nC, nL))
    K_s = np.zeros((nS, nL))
    for k, b in enumerate(br):
        for node, sgn in ((merge.find(b.a), 1.0), (merge.find(b.b), -1.0)):
            if node in fidx:
                K_f[fidx[node], k] += sgn
            elif node in cidx:
                K_c[cidx[node], k] += sgn
            elif node in sidx:
                K_s[sidx[node], k] += sgn

    Lm = np.diag([b.L for b in br])
    for b1, b2, M in net.couplings:
        i, j = bidx[b1], bidx[b2]
        Lm[i, j] += M
        Lm[j, i] += M
    if np.any(np.linalg.eigvalsh(Lm) <= 0):
        raise BuildError("inductance matrix is not positive definite (M >= L?)")
    Rm = np.diag([b.R for b in br])

    G = np.zeros((nF, nF))
    for r in resistors:
        a, b = merge.find(r.a), merge.find(r.b)
        for x in (a, b):
            if x != GROUND and x not in fidx:
                raise BuildError("fault resistors may only touch free nodes")
        g = 1.0 / r.R
        if a != GROUND:
            G[fidx[a], fidx[a]] += g
        if b != GROUND:
            G[fidx[b], fidx[b]] += g
        if a != GROUND and b != GROUND:
            G[fidx[a], fidx[b]] -= g
            G[fidx[b], fidx[a]] -= g

    if nF:
        W = null_space(G.T).T if G.any() else np.eye(nF)
        P = orth(G).T if G.any() else np.zeros((0, nF))
    else:
        W = np.zeros((0, 0))
        P = np.zeros((0, 0))
    nW, nP = W.shape[0], P.shape[0]
    nX = nL + nC
    nU = nS + nE

    E = np.zeros((nL, nE))
    for j, (name, _) in enumerate(net.emfs):
        E[bidx[name], j] = 1.0

    size = nL + nC + nF
    M = np.zeros((size, size))
    N = np.zeros((size, nX))
    S = np.zeros((size, nU))
    r0, r1, r2 = nL, nL + nC, nL + nC + nW
    M[:nL, :nL] = Lm
    M[:nL, nX:] = -K_f.T
    N[:nL, :nL] = -Rm
    N[:nL, nL:] = K_c.T
    S[:nL, :nS] = K_s.T
    S[:nL, nS:] = E
    if nC:
        M[r0:r1, nL:nX] = np.diag([c.C for c in state_caps])
        N[r0:r1, :nL] = -K_c
    if nW:
        M[r1:r2, :nL] = W @ K_f
    if nP:
        M[r2:, nX:] = P @ G
        N[r2:, :nL] = -P @ K_f
    if np.linalg.cond(M) > 1e14:
        raise BuildError("network equations are singular")
    Y = np.linalg.solve(M, np.hstack([N, S]))
    A_full, B_full = Y[:nX, :nX], Y[:nX, nX:]
    E_x, E_u = Y[nX:, :nX], Y[nX:, nX:]

    constraints = np.hstack([W @ K_f, np.zeros((nW, nC))]) if nW else np.zeros((0, nX))
    T = null_space(constraints) if constraints.size else np.eye(nX)
    A = T.T @ A_full @ T
    B = T.T @ B_full

    def pot_rows(node):
        node = merge.find(node)
        cx, du = np.zeros(nX), np.zeros(nU)
        if node == GROUND:
            pass
        elif node in fidx:
            cx, du = E_x[fidx[node]].copy(), E_u[fidx[node]].copy()
        elif node in cidx:
            cx[nL + cidx[node]] = 1.0
        elif node in sidx:
            du[sidx[node]] = 1.0
        else:
            raise BuildError(f"unknown node {node}")
        return cx, du

    rows_c, rows_d, names = [], [], []
    for name, terms in net.taps.items():
        cx, du = np.zeros(nX), np.zeros(nU)
        for kind, target, coeff in terms:
            if kind == "i":
                cx[bidx[target]] += coeff
            elif kind == "v":
                k = bidx[target]
                cx += coeff * (Lm[k] @ A_full[:nL] + (Rm[k] @ np.eye(nX, nX)[:nL]))
                du += coeff * (Lm[k] @ B_full[:nL])
            elif kind == "pot":
                pc, pd = pot_rows(target)
                cx += coeff * pc
                du += coeff * pd
            else:
                raise BuildError(f"unknown tap kind {kind}")
        rows_c.append(cx)
        rows_d.append(du)
        names.append(name)

    pot_c, pot_d, res = [], [], []
    for r in resistors:
        ca, da = pot_rows(r.a)
        cb, db = pot_rows(r.b)
        pot_c.append(ca - cb)
        pot_d.append(da - db)
        res.append(r.R)

    return LinearSystem(
        A=A, B=B, T=T, A_full=A_full, B_full=B_full,
        C_out=np.array(rows_c).reshape(len(names), nX),
        D_out=np.array(rows_d).reshape(len(names), nU),
        tap_names=tuple(names), n_branches=nL,
        pot_C=np.array(pot_c).reshape(len(res), nX),
        pot_D=np.array(pot_d).reshape(len(res), nU),
        resistors=tuple(res),
    )


# -- model of the test grid --------------------------------------------------

@dataclass(frozen=True, eq=False)
class StateSpaceModel:
    """Compiled pre-fault and post-fault configurations plus sources."""

    netlist: Netlist
    pre: LinearSystem
    post: LinearSystem | None
    t_fault: float | None
    stiff: bool
    source_values: np.ndarray   # node sources (stiff mode)
    emf_values: np.ndarray      # series EMFs at full ramp
    ramp_time: float
    x0: np.ndarray
    L_matrix: np.ndarray
    R_diag: np.ndarray
    cap_values: np.ndarray

    def inputs(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        prof = np.clip(t / self.ramp_time, 0.0, 1.0)
        src = np.broadcast_to(self.source_values, (t.size, self.source_values.size))
        emf = prof[:, None] * self.emf_values[None, :]
        return np.hstack([src, emf])

    def inventory(self):
        return self.netlist.inventory()


def _pole(node, pole):
    return f"{node}_{pole}"


def build_netlist(system: SystemParams, topology: Topology, scenario: FaultScenario | None,
                  settings: SimSettings | None = None) -> Netlist:
    settings = settings or SimSettings()
    kind = scenario.kind if scenario is not None else FaultKind.NONE
    V = system.dc_voltage
    eq1, eq2 = system.eq1, system.eq2
    c14, c23 = topology.terminal_capacitances(system)
    clr = topology.clr
    l12 = topology.line("12")
    net = Netlist()

    def line(name, a, b, frac, lp):
        for pole, _ in POLES:
            net.branch(_pole(name, pole), _pole(a, pole), _pole(b, pole), frac * lp.R, frac * lp.L)
        net.couple(_pole(name, "p"), _pole(name, "n"), frac * lp.M)

    for pole, sgn in POLES:
        P = lambda n: _pole(n, pole)  # noqa: E731
        net.branch(P("mmc1"), P("bus1"), P("cmmc1"), eq1.r / 2, eq1.l / 2)
        net.capacitors.append(Capacitor(P("Cmmc1"), P("cmmc1"), 2 * eq1.c, sgn * V / 2))
        net.branch(P("mmc2"), P("bus2"), P("cmmc2"), eq2.r / 2, eq2.l / 2)
        net.capacitors.append(Capacitor(P("Cmmc2"), P("cmmc2"), 2 * eq2.c, sgn * V / 2))
        net.branch(P("clr12"), P("bus1"), P("l12s"), 0.0, clr["12"])
        net.branch(P("clr21"), P("l12e"), P("bus2"), 0.0, clr["21"])
        net.branch(P("clr14"), P("bus1"), P("l14"), 0.0, clr["14"])
        net.branch(P("clr23"), P("bus2"), P("l23"), 0.0, clr["23"])
        net.capacitors.append(Capacitor(P("C14"), P("c14"), 2 * c14, sgn * V / 2))
        net.capacitors.append(Capacitor(P("C23"), P("c23"), 2 * c23, sgn * V / 2))
        if settings.dc_ramp:
            net.emfs.append((P("mmc1"), -sgn * settings.dc_ramp * V / 2))

    line("line14", "l14", "c14", 1.0, topology.line("14"))
    line("line23", "l23", "c23", 1.0, topology.line("23"))

    fault_node = None
    arriving = leaving = None
    if kind.is_internal:
        d = scenario.location_d
        if d == 0.0:
            fault_node = "l12s"
            line("seg2", "l12s", "l12e", 1.0, l12)
            arriving, leaving = "clr12", "seg2"
        elif d == 1.0:
            fault_node = "l12e"
            line("seg1", "l12s", "l12e", 1.0, l12)
            arriving, leaving = "seg1", "clr21"
        else:
            fault_node = "f12"
            line("seg1", "l12s", "f12", d, l12)
            line("seg2", "f12", "l12e", 1.0 - d, l12)
            arriving, leaving = "seg1", "seg2"
    else:
        line("line12", "l12s", "l12e", 1.0, l12)
        if kind.direction == "backward":
            fault_node = "l14"   # line 14 just behind its bus-1 CLR
        elif kind.direction == "forward":
            fault_node = "bus2"

    if kind is not FaultKind.NONE:
        R_f = scenario.r_f
        pole = kind.faulted_pole
        if pole == "pn":
            net.faults.append(FaultBranch(_pole(fault_node, "p"), _pole(fault_node, "n"), R_f))
        else:
            net.faults.append(FaultBranch(_pole(fault_node, pole), GROUND, R_f))

    for pole, _ in POLES:
        net.taps[f"v_clr_{pole}"] = [("v", _pole("clr12", pole), 1.0)]
        net.taps[f"i_{pole}"] = [("i", _pole("clr12", pole), 1.0)]
        if kind.is_internal:
            net.taps[f"v_f_{pole}"] = [("pot", _pole(fault_node, pole), 1.0)]
            net.taps[f"i_f_{pole}"] = [
                ("i", _pole(arriving, pole), 1.0), ("i", _pole(leaving, pole), -1.0)]
    return net


def build_network(topology: Topology, scenario: FaultScenario | None,
                  system: SystemParams | None = None,
                  settings: SimSettings | None = None) -> StateSpaceModel:
    """Compile the equivalent network for one scenario (fault branch open)."""
    system = system or SystemParams()
    settings = settings or SimSettings()
    net = build_netlist(system, topology, scenario, settings)
    stiff = settings.stiff_sources
    pre = _compile(net, closed=False, stiff=stiff)
    has_fault = scenario is not None and scenario.kind is not FaultKind.NONE
    post = _compile(net, closed=True, stiff=stiff) if has_fault else None

    caps = sorted(net.capacitors, key=lambda c: c.node)
    src = np.array([c.v0 for c in caps]) if stiff else np.zeros(0)
    emf = np.array([v for _, v in net.emfs])
    nL = len(net.branches)
    x0 = np.zeros(pre.T.shape[0])
    if not stiff:
        x0[nL:] = [c.v0 for c in caps]

    bidx = {b.name: k for k, b in enumerate(net.branches)}
    Lm = np.diag([b.L for b in net.branches])
    for b1, b2, M in net.couplings:
        Lm[bidx[b1], bidx[b2]] += M
        Lm[bidx[b2], bidx[b1]] += M

    model = StateSpaceModel(
        netlist=net, pre=pre, post=post,
        t_fault=scenario.t_fault if has_fault else None,
        stiff=stiff, source_values=src, emf_values=emf,
        ramp_time=settings.ramp_time, x0=x0, L_matrix=Lm,
        R_diag=np.array([b.R for b in net.branches]),
        cap_values=np.array([c.C for c in caps]),
    )
    if settings.preload_current:
        model = _with_preload(model, settings.preload_current)
    return model


def _with_preload(model: StateSpaceModel, current):
    """Shift the bus-2 sources so line 12 carries ``current`` in steady state."""
    from dataclasses import replace

    net = model.netlist
    caps = sorted(net.capacitors, key=lambda c: c.node)
    bus2_side = np.array([1.0 if c.node.startswith(("cmmc2", "c23")) else 0.0 for c in caps])
    pole_sign = np.array([1.0 if c.node.endswith("_p") else -1.0 for c in caps])
    k_ip = model.pre.tap_names.index("i_p")

    def steady(src):
        u = np.concatenate([src, np.zeros(model.emf_values.size)])
        z = -np.linalg.solve(model.pre.A, model.pre.B @ u)
        x = model.pre.T @ z
        return x, float(model.pre.C_out[k_ip] @ x + model.pre.D_out[k_ip] @ u)

    _, i_unit = steady(model.source_values - bus2_side * pole_sign)
    shift = current / i_unit
    src = model.source_values - shift * bus2_side * pole_sign
    x0, _ = steady(src)
    return replace(model, source_values=src, x0=x0)


# -- integration ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """Relay-point traces; fault-point traces only for internal faults."""

    v_clr_p: Trace
    v_clr_n: Trace
    i_p: Trace
    i_n: Trace
    v_f_p: Trace | None = None
    v_f_n: Trace | None = None
    i_f_p: Trace | None = None
    i_f_n: Trace | None = None
    t_fault: float | None = None
    extra: dict = field(default_factory=dict)

    def traces(self):
        out = [self.v_clr_p, self.v_clr_n, self.i_p, self.i_n]
        out += [tr for tr in (self.v_f_p, self.v_f_n, self.i_f_p, self.i_f_n) if tr is not None]
        return out

    def __post_init__(self):
        ref = self.v_clr_p
        for tr in self.traces():
            if (len(tr), tr.t0, tr.dt) != (len(ref), ref.t0, ref.dt):
                raise ValueError(f"trace {tr.name} is not aligned with {ref.name}")


_UNITS = {"v": "V", "i": "A"}


def _discretize(sys: LinearSystem, h):
    n = sys.A.shape[0]
    I = np.eye(n)
    lhs = I - 0.5 * h * sys.A
    Phi = np.linalg.solve(lhs, I + 0.5 * h * sys.A)
    Gam = np.linalg.solve(lhs, 0.5 * h * sys.B)
    return Phi, Gam


def _march(sys, z0, U, h, t0):
    Phi, Gam = _discretize(sys, h)
    n = U.shape[0]
    Z = np.empty((n, z0.size))
    Z[0] = z0
    drive = (U[:-1] + U[1:]) @ Gam.T
    z = z0
    for k in range(1, n):
        z = Phi @ z + drive[k - 1]
        Z[k] = z
        if k % 1000 == 0 and not np.all(np.isfinite(z)):
            raise SolverError("state diverged", last_valid_time=t0 + h * (k - 1000))
    if not np.all(np.isfinite(Z)):
        bad = int(np.argmax(~np.all(np.isfinite(Z), axis=1)))
        raise SolverError("state diverged", last_valid_time=t0 + h * max(bad - 1, 0))
    return Z


def simulate(model: StateSpaceModel, t_end, dt=2e-6) -> MeasurementSet:
    """Integrate from t=0 to ``t_end``; the fault closes at the first step >= t_fault."""
    if not dt > 0:
        raise ValueError("dt must be > 0")
    if model.t_fault is not None and not t_end > model.t_fault:
        raise ValueError("t_end must be after t_fault")
    n = int(math.floor(t_end / dt + 1e-9)) + 1
    t = dt * np.arange(n)
    U = model.inputs(t)
    k_f = n if model.t_fault is None else int(math.ceil(model.t_fault / dt - 1e-9))
    k_f = min(max(k_f, 0), n)

    pre, post = model.pre, model.post
    X = np.empty((n, model.x0.size))
    z0 = pre.T.T @ model.x0
    if k_f > 0:
        Zpre = _march(pre, z0, U[:k_f + 1] if k_f < n else U[:k_f], dt, 0.0)
        X[:k_f] = Zpre[:k_f] @ pre.T.T
        x_switch = pre.T @ Zpre[k_f] if k_f < n else None
    else:
        x_switch = model.x0
    Y = np.empty((n, len(pre.tap_names)))
    Y[:k_f] = X[:k_f] @ pre.C_out.T + U[:k_f] @ pre.D_out.T
    if k_f < n:
        zs = post.T.T @ x_switch
        Zpost = _march(post, zs, U[k_f:], dt, t[k_f])
        X[k_f:] = Zpost @ post.T.T
        Y[k_f:] = X[k_f:] @ post.C_out.T + U[k_f:] @ post.D_out.T

    traces = {}
    for j, name in enumerate(pre.tap_names):
        unit = _UNITS[name[0]]
        traces[name] = Trace(name, unit, 0.0, dt, Y[:, j])

    extra = {}
    if not model.stiff:
        nL = model.R_diag.size
        I_br = X[:, :nL]
        Vc = X[:, nL:]
        stored = 0.5 * np.einsum("ki,ij,kj->k", I_br, model.L_matrix, I_br)
        stored += 0.5 * (Vc ** 2) @ model.cap_values
        loss = (I_br ** 2) @ model.R_diag
        if post is not None and post.resistors and k_f < n:
            dv = X[k_f:] @ post.pot_C.T + U[k_f:] @ post.pot_D.T
            loss[k_f:] += (dv ** 2) @ (1.0 / np.array(post.resistors))
        extra["energy_stored"] = Trace("energy_stored", "J", 0.0, dt, stored)
        extra["power_dissipated"] = Trace("power_dissipated", "W", 0.0, dt, loss)

    return MeasurementSet(
        v_clr_p=traces["v_clr_p"], v_clr_n=traces["v_clr_n"],
        i_p=traces["i_p"], i_n=traces["i_n"],
        v_f_p=traces.get("v_f_p"), v_f_n=traces.get("v_f_n"),
        i_f_p=traces.get("i_f_p"), i_f_n=traces.get("i_f_n"),
        t_fault=model.t_fault, extra=extra,
    )


def energy_drift(ms: MeasurementSet):
    """Max relative deviation of stored + dissipated energy after inception."""
    stored = ms.extra["energy_stored"]
    loss = ms.extra["power_dissipated"]
    k = stored.index_at(ms.t_fault or 0.0)
    e = stored.samples[k:]
    p = loss.samples[k:]
    dissipated = np.concatenate([[0.0], np.cumsum(0.5 * (p[1:] + p[:-1]) * stored.dt)])
    total = e + dissipated
    return float(np.max(np.abs(total - total[0])) / total[0])


def relay_tap(ms: MeasurementSet):
    """Zero-mode and line-mode CLR voltage traces at the relay."""
    from .modal import PoleQuantities, phase_to_modal

    m = phase_to_modal(PoleQuantities(ms.v_clr_p.samples, ms.v_clr_n.samples))
    return (
        ms.v_clr_p.with_samples(m.x_0, name="v_l0", unit="V"),
        ms.v_clr_p.with_samples(m.x_l, name="v_l1", unit="V"),
    )
