"""Two-level virtual time: job deadline assignment and clock updating for UWFQ.

Every user owns a user-level virtual clock that runs like classic GPS virtual
time over that user's jobs, and every user shares one global virtual clock that
advances at the per-user share ``R / N_users``.  A job's user deadline orders it
inside its user; its global deadline orders it against all jobs in the system.

The kernel is single-writer: callers must serialise operations and feed
non-decreasing wall-clock times.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field

from .model import EPS


class NonMonotonicClock(ValueError):
    pass


class EmptyUser(ValueError):
    pass


class UnknownUser(KeyError):
    pass


def _vtol(x: float) -> float:
    return EPS * max(1.0, abs(x))


@dataclass
class UserJobEntry:
    job_id: str
    slot_time: float
    d_user: float
    arrival: float
    d_global: float = 0.0

    @property
    def key(self):
        return (self.d_user, self.arrival, self.job_id)


@dataclass
class UserState:
    user_id: str
    v_user: float = 0.0
    v_arrival: float = 0.0
    weight: float = 1.0
    jobs: list[UserJobEntry] = field(default_factory=list)
    v_global_end: float | None = None

    def __post_init__(self):
        if not self.weight > 0:
            raise ValueError(f"user weight must be > 0, got {self.weight!r}")
        self._keys = [e.key for e in self.jobs]

    def insert(self, entry: UserJobEntry) -> None:
        i = bisect.bisect_right(self._keys, entry.key)
        self._keys.insert(i, entry.key)
        self.jobs.insert(i, entry)

    def pop_first(self) -> UserJobEntry:
        self._keys.pop(0)
        return self.jobs.pop(0)

    def clear(self) -> list[UserJobEntry]:
        left, self.jobs, self._keys = self.jobs, [], []
        return left

    @property
    def latest_deadline(self) -> float:
        if not self.jobs:
            raise EmptyUser(self.user_id)
        return self.jobs[-1].d_global

    def assign_global_deadlines(self) -> None:
        prev = self.v_arrival
        for e in self.jobs:
            prev = e.d_global = prev + e.slot_time * self.weight

    def advance(self, r_user: float, t_from: float, t_to: float, on_retire=None) -> None:
        """Progress the user clock from ``t_from`` to ``t_to`` at user share ``r_user``.

        Jobs whose user deadline is reached are retired in deadline order; each
        retirement re-splits the share across the remaining jobs.
        """
        t_prev = t_from
        while self.jobs:
            head = self.jobs[0]
            r_job = r_user / len(self.jobs)
            v_assumed = self.v_user + (t_to - t_prev) * r_job
            if head.d_user > v_assumed + _vtol(head.d_user):
                break
            v_spent = max(0.0, head.d_user - self.v_user)
            t_prev += v_spent / r_job
            self.v_user += v_spent
            self.v_arrival += head.slot_time * self.weight
            self.pop_first()
            if on_retire is not None:
                on_retire(self, head, min(t_prev, t_to))
        if self.jobs:
            self.v_user += max(0.0, t_to - t_prev) * (r_user / len(self.jobs))


class VirtualClock:
    """Global two-level virtual-time state.

    ``total_resources`` is the core count R; ``grace`` is the revival window in
    resource-seconds (a departed user is revived while
    ``V_global < V_global_end + grace * R``).
    """

    def __init__(self, total_resources: float, grace: float = 2.0, debug: bool = False):
        if not total_resources > 0:
            raise ValueError("total_resources must be > 0")
        self.R = float(total_resources)
        self.grace = float(grace)
        self.v_global = 0.0
        self.t_previous = 0.0
        self.users: dict[str, UserState] = {}
        self.departed: dict[str, UserState] = {}
        self.deadlines: dict[str, float] = {}
        # wall time at which the user clock retired each job, and its deadline then
        self.retired_at: dict[str, float] = {}
        self.final_deadline: dict[str, float] = {}
        self.history: list[tuple[float, float]] = [(0.0, 0.0)]
        self.debug = debug
        self.log: list[str] = []
        self._user_seq: dict[str, int] = {}

    # -- global update -------------------------------------------------------

    def update(self, now: float) -> None:
        """Advance global and user clocks to wall time ``now``, retiring users whose
        last global deadline passes on the way."""
        if now < self.t_previous - EPS:
            raise NonMonotonicClock(f"update to {now!r} < previous {self.t_previous!r}")
        now = max(now, self.t_previous)
        order = sorted(self.users.values(),
                       key=lambda u: (u.latest_deadline if u.jobs else -float("inf"),
                                      self._user_seq[u.user_id]))
        for user in order:
            r_user = self.R / len(self.users)
            if user.jobs:
                t_finish = self.user_finish_time(user, r_user)
            else:
                t_finish = self.t_previous
            if t_finish > now + EPS:
                break
            t_finish = min(max(t_finish, self.t_previous), now)
            # progress first so the leaving user's own clock retires its jobs
            self.progress(t_finish, r_user)
            del self.users[user.user_id]
            self._depart(user, t_finish)
        if self.users:
            self.progress(now, self.R / len(self.users))
        else:
            # nobody active: the global clock holds still
            self.t_previous = now
            self._mark()
        for user in [u for u in self.users.values() if not u.jobs]:
            del self.users[user.user_id]
            self._depart(user, now)
        self._trace("update")

    def user_finish_time(self, user: UserState, r_user: float) -> float:
        if not user.jobs:
            raise EmptyUser(user.user_id)
        return self.t_previous + (user.latest_deadline - self.v_global) / r_user

    def progress(self, t: float, r_user: float) -> None:
        if t < self.t_previous - EPS:
            raise NonMonotonicClock(f"progress to {t!r} < previous {self.t_previous!r}")
        t = max(t, self.t_previous)
        self.v_global += (t - self.t_previous) * r_user
        for user in self.users.values():
            user.advance(r_user, self.t_previous, t, self._on_retire)
        self.t_previous = t
        self._mark()

    def _mark(self) -> None:
        t, v = self.history[-1]
        if self.t_previous > t or self.v_global > v:
            self.history.append((self.t_previous, self.v_global))

    def _on_retire(self, user: UserState, entry: UserJobEntry, t: float) -> None:
        self.retired_at[entry.job_id] = t
        self.final_deadline[entry.job_id] = entry.d_global

    def _depart(self, user: UserState, t: float) -> None:
        # leftovers count as finished so a revived user resumes from its real end
        for entry in user.clear():
            user.v_user = max(user.v_user, entry.d_user)
            user.v_arrival += entry.slot_time * user.weight
            self._on_retire(user, entry, t)
        user.v_global_end = self.v_global
        self.departed[user.user_id] = user

    # -- deadline assignment -------------------------------------------------

    def assign_deadline(self, user_id: str, job_id: str, now: float, slot_time: float,
                        weight: float | None = None, arrival: float | None = None,
                        revive: bool = True) -> float:
        """Register a new job and return its global deadline.

        Deadlines of the user's other pending jobs may move later when the new
        job sorts ahead of them.
        """
        if not slot_time > 0:
            raise ValueError(f"slot_time must be > 0, got {slot_time!r}")
        self.update(now)
        user = self.users.get(user_id)
        if user is None:
            if not (revive and user_id in self.departed and self._try_revive(user_id)):
                self.departed.pop(user_id, None)
                self.users[user_id] = UserState(user_id, v_arrival=self.v_global,
                                                weight=1.0 if weight is None else weight)
                self._user_seq.setdefault(user_id, len(self._user_seq))
            user = self.users[user_id]
        if weight is not None:
            user.weight = weight
        entry = UserJobEntry(job_id, float(slot_time),
                             d_user=user.v_user + slot_time * user.weight,
                             arrival=now if arrival is None else arrival)
        user.insert(entry)
        user.assign_global_deadlines()
        for e in user.jobs:
            self.deadlines[e.job_id] = e.d_global
        self._trace(f"assign {job_id}")
        return entry.d_global

    # -- grace-period revival -------------------------------------------------

    def maybe_revive(self, user_id: str, now: float) -> bool:
        if user_id in self.users:
            return False
        if user_id not in self.departed:
            raise UnknownUser(user_id)
        self.update(now)
        return self._try_revive(user_id)

    def _try_revive(self, user_id: str) -> bool:
        user = self.departed[user_id]
        if self.v_global < user.v_global_end + self.grace * self.R:
            del self.departed[user_id]
            self.users[user_id] = user
            return True
        return False

    # -- inspection -----------------------------------------------------------

    def wall_time_of(self, v: float) -> float:
        """First wall time at which the global clock reached ``v`` (inf if not yet)."""
        ts = [h[0] for h in self.history]
        vs = [h[1] for h in self.history]
        i = bisect.bisect_left(vs, v - _vtol(v))
        if i == 0:
            return ts[0]
        if i >= len(vs):
            return float("inf")
        (t0, v0), (t1, v1) = self.history[i - 1], self.history[i]
        return t0 + (min(max(v, v0), v1) - v0) * (t1 - t0) / (v1 - v0)

    def dump(self) -> str:
        parts = [f"t={self.t_previous!r} V_global={self.v_global!r}"]
        for uid, u in self.users.items():
            jobs = ",".join(f"{e.job_id}:{e.d_user!r}/{e.d_global!r}" for e in u.jobs)
            parts.append(f"user={uid} V_user={u.v_user!r} V_arrival={u.v_arrival!r} jobs=[{jobs}]")
        return " | ".join(parts)

    def _trace(self, op: str) -> None:
        if self.debug:
            self.log.append(f"{op}: {self.dump()}")


@dataclass
class KernelSchedule:
    deadlines: dict[str, float]
    retired_at: dict[str, float]
    completion: dict[str, float]


def replay_kernel(jobs, total_resources: float, grace: float = 0.0) -> KernelSchedule:
    """Feed every job arrival into a fresh clock and run it until all users leave.

    ``retired_at`` holds the wall time the user clock retired each job;
    ``completion`` maps each job's final global deadline back to wall time.
    """
    clock = VirtualClock(total_resources, grace=grace)
    for job in sorted(jobs, key=lambda j: (j.arrival, j.job_id)):
        clock.assign_deadline(job.user_id, job.job_id, job.arrival, job.slot_time, arrival=job.arrival)
    while clock.users:
        r_user = clock.R / len(clock.users)
        horizon = max(clock.user_finish_time(u, r_user) for u in clock.users.values())
        clock.update(horizon)
    completion = {jid: clock.wall_time_of(d) for jid, d in clock.final_deadline.items()}
    return KernelSchedule(dict(clock.final_deadline), dict(clock.retired_at), completion)
