"""Independent re-run of a spring-block session log.

Reads a .slog, replays its controls against a from-the-rules OFC lattice
(xoshiro256** from xoshiro_reference, synchronous sweeps, row-major slips)
and compares every event against an events file field by field.
Usage: python3 session_reference.py golden.slog golden.events.jsonl
"""
import json
import math
import sys

from xoshiro_reference import rotl, splitmix64

M = (1 << 64) - 1


class Rng:
    def __init__(self, seed):
        self.s, x = [], seed
        for _ in range(4):
            x, w = splitmix64(x)
            self.s.append(w)

    def next(self):
        s = self.s
        out = (rotl((s[1] * 5) & M, 7) * 9) & M
        t = (s[1] << 17) & M
        s[2] ^= s[0]; s[3] ^= s[1]; s[1] ^= s[2]; s[0] ^= s[3]
        s[2] ^= t
        s[3] = rotl(s[3], 45)
        return out

    def uniform(self):
        return (self.next() >> 11) * 2.0 ** -53


class Ofc:
    def __init__(self, L, alpha, noise, rate_scale, seed):
        self.L, self.alpha, self.noise, self.rate_scale = L, alpha, noise, rate_scale
        self.rng = Rng(seed)
        self.f = [self.rng.uniform() for _ in range(L * L)]
        self.rate = 0.0
        self.next_id = 0

    def set_drive(self, v):
        self.rate = self.rate_scale * math.sqrt(v[0] * v[0] + v[1] * v[1])

    def relax(self, ev):
        L, f = self.L, self.f
        top = [i for i in range(L * L) if f[i] >= 1.0]
        seen = set()
        while top:
            share = [0.0] * (L * L)
            resid = {}
            step = []
            for i in top:
                v = f[i]
                resid[i] = self.noise * self.rng.uniform() if self.noise > 0 else 0.0
                share[i] = self.alpha * v
                r, c = divmod(i, L)
                missing = (r == 0) + (r == L - 1) + (c == 0) + (c == L - 1)
                step.append([r, c, v])
                ev["size"] += 1
                ev["area"] += i not in seen
                seen.add(i)
                ev["loss"] += share[i] * missing
            ev["steps"].append(step)
            new = list(f)
            for i in set(j for t in top for j in [t] + self.nbrs(t)):
                r, c = divmod(i, L)
                v = resid[i] if i in resid else f[i]
                if r > 0: v += share[i - L]
                if r < L - 1: v += share[i + L]
                if c > 0: v += share[i - 1]
                if c < L - 1: v += share[i + 1]
                new[i] = v
            self.f = f = new
            top = sorted(i for i in set(j for t in top for j in [t] + self.nbrs(t)) if f[i] >= 1.0)
        ev["duration"] = len(ev["steps"])
        ev["moment"] = 0.0
        for step in ev["steps"]:
            for s in step:
                ev["moment"] += s[2]
        ev["magnitude"] = (2.0 / 3.0) * math.log10(ev["moment"]) if ev["moment"] > 0 else 0.0
        return ev

    def nbrs(self, i):
        L = self.L
        r, c = divmod(i, L)
        out = []
        if r > 0: out.append(i - L)
        if r < L - 1: out.append(i + L)
        if c > 0: out.append(i - 1)
        if c < L - 1: out.append(i + 1)
        return out

    def event(self):
        ev = {"id": self.next_id, "trigger": [0, 0], "size": 0, "area": 0, "loss": 0.0, "steps": []}
        self.next_id += 1
        return ev

    def load_step(self):
        ev = self.event()
        self.f = [x + self.rate for x in self.f]
        hot = [i for i in range(self.L ** 2) if self.f[i] >= 1.0]
        if hot: ev["trigger"] = list(divmod(hot[0], self.L))
        return self.relax(ev)

    def extremal(self):
        ev = self.event()
        top = max(self.f)
        d = 1.0 - top
        self.f = [1.0 if x == top else x + d for x in self.f]
        hot = [i for i in range(self.L ** 2) if self.f[i] >= 1.0]
        ev["trigger"] = list(divmod(hot[0], self.L))
        return self.relax(ev)


def run(slog):
    lines = open(slog).read().splitlines()
    cfg = json.loads(lines[0])["config"]
    assert cfg["model"] == "springblock"
    records = [json.loads(x) for x in lines[1:]]

    def fresh():
        m = Ofc(cfg["size"], cfg["alpha"], cfg["residual_noise"], cfg["rate_scale"], cfg["seed"])
        m.set_drive(cfg["drive"])
        return m

    model, paused, out, r = fresh(), False, [], 0
    for k in range(10 ** 9):
        tick = []
        while r < len(records) and records[r]["k"] == k:
            rec = records[r]; r += 1
            t = rec["t"]
            if t == "control.stop":
                return out
            if t == "control.set_drive": model.set_drive(rec["v"])
            elif t == "control.drop": tick += [model.extremal() for _ in range(rec["n"])]
            elif t == "control.pause": paused = rec["paused"]
            elif t == "control.reset": model, paused, tick = fresh(), False, []
        if not paused:
            tick.append(model.load_step())
        out += [(k, ev) for ev in tick if ev["size"] > 0]


def main():
    expected = run(sys.argv[1])
    got = [json.loads(x) for x in open(sys.argv[2]).read().splitlines()]
    assert len(got) == len(expected), (len(got), len(expected))
    for (k, ev), g in zip(expected, got):
        ev["magnitude"] = float("%.10g" % ev["magnitude"])
        assert g["k"] == k, (g["k"], k)
        for key in ("id", "trigger", "size", "area", "duration", "loss", "magnitude", "moment", "steps"):
            assert g[key] == ev[key], (ev["id"], key, g[key], ev[key])
    print("ok: %d events match" % len(got))


if __name__ == "__main__":
    main()
