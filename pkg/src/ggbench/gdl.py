"""MicroGDL: a compact parenthesized language for small turn-based grid games.

A game text is a single s-expression with fields in fixed order::

    (game (grid W H) (players P) (obs full | radius R) (noise N) (horizon T)
          (init (avatar X Y) (goal X Y) ... )
          (actions up down left right stay place)
          (rules (when (COND) (EFFECT) (EFFECT) ...) ...)
          [(opponent random | chase avatar | flee avatar | greedy goal|item)]
          (score STEP WIN LOSE))

* grid sides are 2..8; players is 1 or 2; radius is 1..3.
* noise is one of 0, 1/16, 1/8, 1/4: the chance a movement action is
  replaced by a uniformly random declared movement action.
* horizon is one of 8, 16, 32, 64, 128 ticks (hard episode cap).
* init places pieces (avatar, goal, hazard, item, opp, wall).  Exactly one
  avatar; at most one opp; the opp appears iff the game is two-player or a
  scripted opponent policy is declared.  Two placements of the same kind may
  not share a cell (different kinds may).
* actions is a non-empty subset of up/down/left/right/stay, plus place in
  two-player games (place drops the mover's mark: avatar -> item,
  second player -> hazard).  The derivation picks among full-navigation
  presets (the four directions, optionally with stay, and in two-player
  games optionally with place) before falling back to an arbitrary subset,
  so most sampled games leave the player real agency.
* up to 8 rules; conditions are (overlap avatar Q) and
  (adjacent avatar Q) with Q a piece kind that can actually occur: placed
  in init, or spawned by an earlier rule (rules hinge on what the player
  touches, which keeps randomly drawn games responsive to play and free of
  dead references); (count K <=|=|>= N) with K a board kind
  (goal/hazard/item/wall) and N in 0..8; or (tick <=|=|>= N) with N in
  0..horizon.  Effects are (reward D) with D in -4..4, (remove K),
  (teleport K random|corner), (spawn K random|corner) and
  (end win|lose|draw).  remove/spawn take goal/hazard/item/wall.
* score gives the per-tick delta (-1..1), win bonus (0..8) and lose
  bonus (-8..0).

Every description has an exact bit length: the sum over the derivation's
choice points of log2(number of alternatives), with one continue/stop bit
per repeated element.  Drawing uniformly at every choice point therefore
samples a game with probability exactly 2**(-length).  Serialization is
canonical (single spaces, fixed field order, placements sorted by kind
then row then column) so the length is a function of the game, not of how
its text was written.
"""

import hashlib
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Optional, Union

# ── Alphabets (order is load-bearing: choice indices and canonical text) ──

PIECES = ("avatar", "goal", "hazard", "item", "opp", "wall")
ACTIONS = ("up", "down", "left", "right", "stay", "place")
MOVE_ACTIONS = ACTIONS[:5]
NOISE_LEVELS = (Fraction(0), Fraction(1, 16), Fraction(1, 8), Fraction(1, 4))
HORIZONS = (8, 16, 32, 64, 128)
CMPS = ("<=", "=", ">=")
CONDS = ("overlap", "adjacent", "count", "tick")
TOUCHABLE = ("goal", "hazard", "item", "opp", "wall")  # overlap/adjacent partners
EFFECTS = ("reward", "remove", "teleport", "spawn", "end")
REMOVABLE = ("goal", "hazard", "item", "wall")
SPAWNABLE = REMOVABLE
MODES = ("random", "corner")
RESULTS = ("win", "lose", "draw")
OPP_POLICIES = ("random", "chase", "flee", "greedy")
GREEDY_TARGETS = ("goal", "item")
GRID_MIN, GRID_MAX = 2, 8
RULE_CAP = 8
COUNT_MAX = 8
REWARD_MIN, REWARD_MAX = -4, 4

_NOISE_TEXT = {Fraction(0): "0", Fraction(1, 16): "1/16",
               Fraction(1, 8): "1/8", Fraction(1, 4): "1/4"}
_TEXT_NOISE = {v: k for k, v in _NOISE_TEXT.items()}


class Placement(NamedTuple):
    piece: str
    x: int
    y: int


class Rule(NamedTuple):
    condition: tuple
    effects: tuple


@dataclass(frozen=True)
class GameDescription:
    """A validated MicroGDL game plus its exact description length in bits."""

    grid_w: int
    grid_h: int
    players: int
    obs_mode: str          # "full" | "radius"
    obs_radius: int        # 0 when full
    noise: Fraction
    horizon: int
    layout: tuple          # Placement tuple, canonically sorted
    actions: tuple         # subset of ACTIONS in canonical order
    rules: tuple           # Rule tuple, authored order
    opponent: Optional[tuple]
    step_delta: int
    win_reward: int
    lose_reward: int
    desc_len_bits: float

    def pieces_of(self, kind):
        return tuple(p for p in self.layout if p.piece == kind)


class RewardBounds(NamedTuple):
    r_min: int
    r_max: int


class Issue(NamedTuple):
    code: str
    message: str
    location: str
    severity: str  # "error" | "warning"


class ValidationReport(NamedTuple):
    ok: bool
    issues: tuple


class ParseError(ValueError):
    def __init__(self, message, line, col):
        super().__init__(f"line {line}:{col}: {message}")
        self.line = line
        self.col = col
        self.reason = message


class ValidationError(ValueError):
    def __init__(self, report):
        errs = [i for i in report.issues if i.severity == "error"]
        super().__init__("; ".join(f"{i.code}: {i.message}" for i in errs))
        self.report = report


# ── Tokenizer ─────────────────────────────────────────────────────────

class _Token(NamedTuple):
    text: str  # "(" | ")" | atom
    line: int
    col: int


def _tokenize(text):
    tokens = []
    line, col = 1, 1
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
        elif c in " \t\r":
            col += 1
            i += 1
        elif c in "()":
            tokens.append(_Token(c, line, col))
            col += 1
            i += 1
        else:
            j = i
            while j < n and text[j] not in "() \t\r\n":
                j += 1
            tokens.append(_Token(text[i:j], line, col))
            col += j - i
            i = j
    return tokens


class _Reader:
    def __init__(self, text):
        self._toks = _tokenize(text)
        self._pos = 0

    def _peek(self):
        if self._pos < len(self._toks):
            return self._toks[self._pos]
        last = self._toks[-1] if self._toks else _Token("", 1, 1)
        return _Token("<end of input>", last.line, last.col + len(last.text))

    def fail(self, message):
        t = self._peek()
        raise ParseError(message, t.line, t.col)

    def next(self, expected):
        t = self._peek()
        if t.text == "<end of input>":
            self.fail(f"expected {expected}, got end of input")
        self._pos += 1
        return t

    def open(self, what=""):
        t = self.next("'('")
        if t.text != "(":
            raise ParseError(f"expected '('{' for ' + what if what else ''}, got '{t.text}'",
                             t.line, t.col)
        return t

    def close(self, what=""):
        t = self.next("')'")
        if t.text != ")":
            raise ParseError(f"expected ')'{' after ' + what if what else ''}, got '{t.text}'",
                             t.line, t.col)

    def atom(self, expected):
        t = self.next(expected)
        if t.text in "()":
            raise ParseError(f"expected {expected}, got '{t.text}'", t.line, t.col)
        return t

    def keyword(self, word):
        t = self.atom(f"'{word}'")
        if t.text != word:
            raise ParseError(f"expected '{word}', got '{t.text}'", t.line, t.col)
        return t

    def at_close(self):
        return self._peek().text == ")"

    def at_end(self):
        return self._pos >= len(self._toks)

    def int_in(self, lo, hi, what):
        t = self.atom(what)
        try:
            v = int(t.text)
        except ValueError:
            raise ParseError(f"expected integer for {what}, got '{t.text}'",
                             t.line, t.col) from None
        if not lo <= v <= hi:
            raise ParseError(f"{what} out of range {lo}..{hi}", t.line, t.col)
        return v

    def one_of(self, options, what):
        t = self.atom(what)
        if t.text not in options:
            raise ParseError(f"expected {what} ({'|'.join(options)}), got '{t.text}'",
                             t.line, t.col)
        return t.text


# ── Structural parse (syntax + numeric ranges) ────────────────────────

def _parse_structure(text):
    """Parse text into raw field dict; ranges are enforced, semantics are not."""
    r = _Reader(text)
    r.open("game")
    r.keyword("game")

    r.open("grid")
    r.keyword("grid")
    grid_w = r.int_in(GRID_MIN, GRID_MAX, "grid width")
    grid_h = r.int_in(GRID_MIN, GRID_MAX, "grid height")
    r.close("grid")

    r.open("players")
    r.keyword("players")
    players = r.int_in(1, 2, "players")
    r.close("players")

    r.open("obs")
    r.keyword("obs")
    kind = r.one_of(("full", "radius"), "observation mode")
    if kind == "radius":
        obs_mode, obs_radius = "radius", r.int_in(1, 3, "radius")
    else:
        obs_mode, obs_radius = "full", 0
    r.close("obs")

    r.open("noise")
    r.keyword("noise")
    noise = _TEXT_NOISE[r.one_of(tuple(_TEXT_NOISE), "noise level")]
    r.close("noise")

    r.open("horizon")
    r.keyword("horizon")
    t = r.atom("horizon")
    try:
        horizon = int(t.text)
    except ValueError:
        raise ParseError(f"expected integer horizon, got '{t.text}'", t.line, t.col) from None
    if horizon not in HORIZONS:
        raise ParseError(f"horizon must be one of {HORIZONS}", t.line, t.col)
    r.close("horizon")

    r.open("init")
    r.keyword("init")
    layout = []
    while not r.at_close():
        r.open("placement")
        piece = r.one_of(PIECES, "piece kind")
        x = r.int_in(0, GRID_MAX - 1, "placement x")
        y = r.int_in(0, GRID_MAX - 1, "placement y")
        r.close("placement")
        layout.append(Placement(piece, x, y))
    r.close("init")

    r.open("actions")
    r.keyword("actions")
    actions = []
    while not r.at_close():
        actions.append(r.one_of(ACTIONS, "action"))
    r.close("actions")

    r.open("rules")
    r.keyword("rules")
    rules = []
    avail = _touch_partners(layout, ())
    while not r.at_close():
        rules.append(_parse_rule(r, horizon, avail))
        avail = _touch_partners(layout, rules)
    r.close("rules")

    opponent = None
    r.open("opponent or score")
    head = r.atom("section name")
    if head.text == "opponent":
        pol = r.one_of(OPP_POLICIES, "opponent policy")
        if pol == "random":
            opponent = ("random",)
        elif pol in ("chase", "flee"):
            r.keyword("avatar")
            opponent = (pol, "avatar")
        else:
            opponent = ("greedy", r.one_of(GREEDY_TARGETS, "greedy target"))
        r.close("opponent")
        r.open("score")
        r.keyword("score")
    elif head.text == "score":
        pass
    else:
        raise ParseError(f"expected 'opponent' or 'score', got '{head.text}'",
                         head.line, head.col)
    step_delta = r.int_in(-1, 1, "step delta")
    win_reward = r.int_in(0, 8, "win reward")
    lose_reward = r.int_in(-8, 0, "lose reward")
    r.close("score")
    r.close("game")
    if not r.at_end():
        r.fail("unexpected trailing input")

    return dict(grid_w=grid_w, grid_h=grid_h, players=players,
                obs_mode=obs_mode, obs_radius=obs_radius, noise=noise,
                horizon=horizon, layout=layout, actions=actions,
                rules=rules, opponent=opponent, step_delta=step_delta,
                win_reward=win_reward, lose_reward=lose_reward)


def _touch_partners(layout, rules):
    """Kinds an overlap/adjacent rule may reference at this point: placed in
    init or spawned by one of the given earlier rules."""
    kinds = {p.piece for p in layout}
    for rule in rules:
        kinds.update(e[1] for e in rule.effects if e[0] == "spawn")
    return tuple(k for k in TOUCHABLE if k in kinds)


def _parse_rule(r, horizon, avail):
    r.open("rule")
    r.keyword("when")
    r.open("condition")
    kind = r.one_of(CONDS, "condition")
    if kind in ("overlap", "adjacent"):
        if not avail:
            r.fail(f"{kind} rule needs a placed or previously spawned piece kind")
        r.keyword("avatar")
        cond = (kind, "avatar", r.one_of(avail, "placed or spawned piece kind"))
    elif kind == "count":
        cond = ("count", r.one_of(REMOVABLE, "board piece kind"),
                r.one_of(CMPS, "comparator"), r.int_in(0, COUNT_MAX, "count"))
    else:
        cond = ("tick", r.one_of(CMPS, "comparator"), r.int_in(0, horizon, "tick"))
    r.close("condition")
    effects = []
    while not r.at_close():
        effects.append(_parse_effect(r))
    if not effects:
        r.fail("rule needs at least one effect")
    r.close("rule")
    return Rule(cond, tuple(effects))


def _parse_effect(r):
    r.open("effect")
    kind = r.one_of(EFFECTS, "effect")
    if kind == "reward":
        eff = ("reward", r.int_in(REWARD_MIN, REWARD_MAX, "reward delta"))
    elif kind == "remove":
        eff = ("remove", r.one_of(REMOVABLE, "removable kind"))
    elif kind == "teleport":
        eff = ("teleport", r.one_of(PIECES, "piece kind"), r.one_of(MODES, "mode"))
    elif kind == "spawn":
        eff = ("spawn", r.one_of(SPAWNABLE, "spawnable kind"), r.one_of(MODES, "mode"))
    else:
        eff = ("end", r.one_of(RESULTS, "result"))
    r.close("effect")
    return eff


# ── Semantic validation ───────────────────────────────────────────────

def _semantic_issues(raw):
    issues = []

    def err(code, message, location=""):
        issues.append(Issue(code, message, location, "error"))

    # field domains (the parser enforces these; hand-built games come here)
    if not (GRID_MIN <= raw["grid_w"] <= GRID_MAX and GRID_MIN <= raw["grid_h"] <= GRID_MAX):
        err("BAD_FIELD", "grid sides must be 2..8", "grid")
    if raw["players"] not in (1, 2):
        err("BAD_FIELD", "players must be 1 or 2", "players")
    if raw["obs_mode"] == "radius" and not 1 <= raw["obs_radius"] <= 3:
        err("BAD_FIELD", "radius must be 1..3", "obs")
    if raw["noise"] not in NOISE_LEVELS:
        err("BAD_FIELD", "noise must be 0, 1/16, 1/8 or 1/4", "noise")
    if raw["horizon"] not in HORIZONS:
        err("BAD_FIELD", f"horizon must be one of {HORIZONS}", "horizon")
    if not (-1 <= raw["step_delta"] <= 1 and 0 <= raw["win_reward"] <= 8
            and -8 <= raw["lose_reward"] <= 0):
        err("BAD_FIELD", "score triple out of range", "score")

    layout = raw["layout"]
    w, h = raw["grid_w"], raw["grid_h"]
    avatars = [p for p in layout if p.piece == "avatar"]
    opps = [p for p in layout if p.piece == "opp"]
    if not avatars:
        err("AVATAR_MISSING", "layout must place exactly one avatar", "init")
    elif len(avatars) > 1:
        err("AVATAR_MULTIPLE", f"{len(avatars)} avatars placed", "init")
    if len(opps) > 1:
        err("OPP_MULTIPLE", f"{len(opps)} opp pieces placed", "init")

    seen = set()
    for p in layout:
        if not (0 <= p.x < w and 0 <= p.y < h):
            err("OUT_OF_GRID", f"({p.piece} {p.x} {p.y}) outside {w}x{h} grid", "init")
        key = (p.piece, p.x, p.y)
        if key in seen:
            err("DUP_PLACEMENT", f"duplicate ({p.piece} {p.x} {p.y})", "init")
        seen.add(key)

    needs_opp = raw["players"] == 2 or raw["opponent"] is not None
    if needs_opp and not opps:
        err("OPP_MISSING", "opponent policy or second player declared but no opp placed",
            "init")
    if opps and not needs_opp:
        err("OPP_UNDECLARED", "opp placed without a second player or opponent policy",
            "init")
    if raw["players"] == 2 and raw["opponent"] is not None:
        err("OPP_POLICY_2P", "scripted opponent policy not allowed in two-player games",
            "opponent")

    if not raw["actions"]:
        err("NO_ACTIONS", "at least one action must be declared", "actions")
    if len(set(raw["actions"])) != len(raw["actions"]):
        err("DUP_ACTION", "duplicate action declared", "actions")
    if "place" in raw["actions"] and raw["players"] != 2:
        err("PLACE_UNUSABLE", "place action requires a two-player game", "actions")

    if len(raw["rules"]) > RULE_CAP:
        err("TOO_MANY_RULES", f"{len(raw['rules'])} rules exceed cap {RULE_CAP}", "rules")
    for i, rule in enumerate(raw["rules"]):
        where = f"rule {i}"
        cond = rule.condition
        if cond[0] in ("overlap", "adjacent"):
            avail = _touch_partners(layout, raw["rules"][:i])
            if cond[1] != "avatar" or cond[2] not in avail:
                err("BAD_RULE",
                    f"{cond[0]} takes avatar and a placed or previously "
                    f"spawned kind", where)
        elif cond[0] == "count":
            if cond[1] not in REMOVABLE or cond[2] not in CMPS \
                    or not 0 <= cond[3] <= COUNT_MAX:
                err("BAD_RULE", "count takes a board kind, comparator, 0..8", where)
        elif cond[0] == "tick":
            if cond[1] not in CMPS or not 0 <= cond[2] <= raw["horizon"]:
                err("BAD_RULE", "tick takes a comparator and 0..horizon", where)
        else:
            err("BAD_RULE", f"unknown condition {cond[0]!r}", where)
        if not rule.effects:
            err("BAD_RULE", "rule needs at least one effect", where)
        for eff in rule.effects:
            ok_eff = (eff[0] == "reward" and REWARD_MIN <= eff[1] <= REWARD_MAX) or \
                     (eff[0] == "remove" and eff[1] in REMOVABLE) or \
                     (eff[0] == "teleport" and eff[1] in PIECES and eff[2] in MODES) or \
                     (eff[0] == "spawn" and eff[1] in SPAWNABLE and eff[2] in MODES) or \
                     (eff[0] == "end" and eff[1] in RESULTS)
            if not ok_eff:
                err("BAD_RULE", f"malformed effect {eff!r}", where)

    # Warning only: a count over a kind that never exists is constant 0, so
    # comparisons demanding a positive count can never fire.
    present = {p.piece for p in layout}
    spawned = {e[1] for rule in raw["rules"] for e in rule.effects if e[0] == "spawn"}
    for i, rule in enumerate(raw["rules"]):
        cond = rule.condition
        if cond[0] != "count" or cond[1] in present or cond[1] in spawned:
            continue
        if cond[3] > 0 and cond[2] in (">=", "="):
            issues.append(Issue("VACUOUS_RULE",
                                f"rule {i} counts '{cond[1]}' which never exists",
                                f"rule {i}", "warning"))
    return issues


def validate(desc_or_text: Union[str, GameDescription]) -> ValidationReport:
    """Report all semantic problems; ok is True iff there are no errors."""
    if isinstance(desc_or_text, GameDescription):
        raw = _raw_of(desc_or_text)
    else:
        try:
            raw = _parse_structure(desc_or_text)
        except ParseError as e:
            issue = Issue("PARSE", e.reason, f"line {e.line}:{e.col}", "error")
            return ValidationReport(False, (issue,))
    issues = _semantic_issues(raw)
    ok = not any(i.severity == "error" for i in issues)
    return ValidationReport(ok, tuple(issues))


def _raw_of(desc):
    return dict(grid_w=desc.grid_w, grid_h=desc.grid_h, players=desc.players,
                obs_mode=desc.obs_mode, obs_radius=desc.obs_radius,
                noise=desc.noise, horizon=desc.horizon, layout=list(desc.layout),
                actions=list(desc.actions), rules=list(desc.rules),
                opponent=desc.opponent, step_delta=desc.step_delta,
                win_reward=desc.win_reward, lose_reward=desc.lose_reward)


# ── Construction ──────────────────────────────────────────────────────

def _canon_layout(layout):
    return tuple(sorted(layout, key=lambda p: (PIECES.index(p.piece), p.y, p.x)))


def _canon_actions(actions):
    return tuple(a for a in ACTIONS if a in actions)


def _build(raw):
    issues = _semantic_issues(raw)
    if any(i.severity == "error" for i in issues):
        raise ValidationError(ValidationReport(False, tuple(issues)))
    fields = dict(raw)
    fields["layout"] = _canon_layout(raw["layout"])
    fields["actions"] = _canon_actions(raw["actions"])
    fields["rules"] = tuple(raw["rules"])
    desc = GameDescription(desc_len_bits=0.0, **fields)
    points = _encode(desc)
    object.__setattr__(desc, "desc_len_bits", _bits_of(points))
    return desc


def parse(text: str) -> GameDescription:
    """Parse MicroGDL text; raises ParseError / ValidationError."""
    return _build(_parse_structure(text))


def make_game(**fields) -> GameDescription:
    """Build a validated description from keyword fields (tests, hand authoring).

    layout entries may be plain tuples; rules may be (condition, effects) pairs.
    """
    raw = dict(obs_mode="full", obs_radius=0, noise=Fraction(0), opponent=None,
               step_delta=0, win_reward=0, lose_reward=0, rules=())
    raw.update(fields)
    raw["layout"] = [Placement(*p) for p in raw["layout"]]
    raw["rules"] = [Rule(c, tuple(map(tuple, e))) for c, e in raw["rules"]]
    raw["noise"] = Fraction(raw["noise"])
    raw["actions"] = list(raw["actions"])
    return _build(raw)


# ── Canonical serialization ───────────────────────────────────────────

def serialize(desc: GameDescription) -> str:
    """Canonical single-line text; parse(serialize(d)) == d."""
    parts = [f"(grid {desc.grid_w} {desc.grid_h})",
             f"(players {desc.players})",
             "(obs full)" if desc.obs_mode == "full" else f"(obs radius {desc.obs_radius})",
             f"(noise {_NOISE_TEXT[desc.noise]})",
             f"(horizon {desc.horizon})",
             "(init " + " ".join(f"({p.piece} {p.x} {p.y})" for p in desc.layout) + ")",
             "(actions " + " ".join(desc.actions) + ")",
             "(rules" + "".join(" " + _rule_text(r) for r in desc.rules) + ")"]
    if desc.opponent is not None:
        parts.append("(opponent " + " ".join(desc.opponent) + ")")
    parts.append(f"(score {desc.step_delta} {desc.win_reward} {desc.lose_reward})")
    return "(game " + " ".join(parts) + ")"


def _rule_text(rule):
    cond = "(" + " ".join(str(a) for a in rule.condition) + ")"
    effs = " ".join("(" + " ".join(str(a) for a in e) + ")" for e in rule.effects)
    return f"(when {cond} {effs})"


def game_id(desc: GameDescription) -> str:
    """Stable short identifier: hash of the canonical text."""
    return hashlib.sha256(serialize(desc).encode()).hexdigest()[:12]


# ── Choice walk: description length and grammar-driven derivation ─────
#
# _encode and derive traverse the same choice points in the same order; the
# former replays an existing description, the latter builds one from a
# choice source.  Any edit to one must be mirrored in the other.

def _bits_of(points):
    total = 0.0
    for _idx, n in points:
        total += math.log2(n)
    return total


def description_length(desc: GameDescription) -> float:
    """Exact code length in bits of the canonical derivation."""
    return _bits_of(_encode(desc))


def _encode(desc):
    w, h = desc.grid_w, desc.grid_h
    pts = []

    def put(idx, n):
        if not 0 <= idx < n:
            raise AssertionError(f"choice {idx} outside {n}")
        pts.append((idx, n))

    put(w - GRID_MIN, 7)
    put(h - GRID_MIN, 7)
    put(desc.players - 1, 2)
    if desc.obs_mode == "full":
        put(0, 2)
    else:
        put(1, 2)
        put(desc.obs_radius - 1, 3)
    put(NOISE_LEVELS.index(desc.noise), 4)
    put(HORIZONS.index(desc.horizon), 5)

    avatar = desc.pieces_of("avatar")[0]
    put(avatar.y * w + avatar.x, w * h)
    for kind in ("goal", "hazard", "item"):
        _encode_repeat(put, desc.pieces_of(kind), w, h)
    opps = desc.pieces_of("opp")
    if desc.players == 1:
        put(1 if opps else 0, 2)
    if opps:
        put(opps[0].y * w + opps[0].x, w * h)
    _encode_repeat(put, desc.pieces_of("wall"), w, h)

    _encode_actions(put, desc.actions, desc.players)

    # rule count arm: none / exactly one / two plus a geometric tail
    avail = _touch_partners(desc.layout, ())
    n_rules = len(desc.rules)
    put(min(n_rules, 2), 3)
    for i, rule in enumerate(desc.rules):
        if i >= 2:
            put(1, 2)
        _encode_rule(put, rule, desc.horizon, avail)
        avail = _touch_partners(desc.layout, desc.rules[:i + 1])
    if n_rules >= 2 and n_rules < RULE_CAP:
        put(0, 2)

    if desc.players == 1 and opps:
        pol = desc.opponent
        put(OPP_POLICIES.index(pol[0]), 4)
        if pol[0] == "greedy":
            put(GREEDY_TARGETS.index(pol[1]), 2)

    put(desc.step_delta + 1, 3)
    put(desc.win_reward, 9)
    put(desc.lose_reward + 8, 9)
    return pts


def _action_arms(players):
    """Preset action sets tried before the arbitrary-subset arm."""
    dirs = ACTIONS[:4]
    arms = [dirs, dirs + ("stay",)]
    if players == 2:
        arms += [dirs + ("place",), dirs + ("stay", "place")]
    return arms


def _special_masks(arms, alphabet):
    index = {a: i for i, a in enumerate(alphabet)}
    return sorted(sum(1 << index[a] for a in arm) for arm in arms)


def _encode_actions(put, actions, players):
    alphabet = ACTIONS if players == 2 else MOVE_ACTIONS
    arms = _action_arms(players)
    mask = sum(1 << i for i, a in enumerate(alphabet) if a in actions)
    specials = _special_masks(arms, alphabet)
    n_arms = len(arms) + 1
    for k, arm in enumerate(arms):
        if tuple(actions) == arm:
            put(k, n_arms)
            return
    put(n_arms - 1, n_arms)
    m = mask - sum(1 for s in specials if s < mask)
    put(m - 1, (1 << len(alphabet)) - 1 - len(specials))


def _derive_actions(c, players):
    alphabet = ACTIONS if players == 2 else MOVE_ACTIONS
    arms = _action_arms(players)
    n_arms = len(arms) + 1
    k = c(n_arms)
    if k < len(arms):
        return list(arms[k])
    specials = _special_masks(arms, alphabet)
    mask = 1 + c((1 << len(alphabet)) - 1 - len(specials))
    for s in specials:
        if mask >= s:
            mask += 1
    return [a for i, a in enumerate(alphabet) if mask >> i & 1]


def _encode_repeat(put, placements, w, h):
    occupied = set()
    for p in placements:
        cell = p.y * w + p.x
        put(1, 2)
        rank = cell - sum(1 for o in occupied if o < cell)
        put(rank, w * h - len(occupied))
        occupied.add(cell)
    if len(occupied) < w * h:
        put(0, 2)


def _encode_rule(put, rule, horizon, avail):
    cond = rule.condition
    if avail:
        # touch conditions carry their own arms so they dominate the draw
        if cond[0] in ("overlap", "adjacent"):
            put(("overlap", "adjacent").index(cond[0]), 3)
        else:
            put(2, 3)
            put(("count", "tick").index(cond[0]), 2)
    else:
        put(("count", "tick").index(cond[0]), 2)
    if cond[0] in ("overlap", "adjacent"):
        put(avail.index(cond[2]), len(avail))
    elif cond[0] == "count":
        put(REMOVABLE.index(cond[1]), 4)
        put(CMPS.index(cond[2]), 3)
        put(cond[3], COUNT_MAX + 1)
    else:
        put(CMPS.index(cond[1]), 3)
        put(cond[2], horizon + 1)
    _encode_effect(put, rule.effects[0])
    for eff in rule.effects[1:]:
        put(1, 2)
        _encode_effect(put, eff)
    put(0, 2)


def _encode_effect(put, eff):
    # scoring effects form their own arm: half of all drawn effects move the
    # score, which is what ties sampled rules to the game's outcome
    if eff[0] in ("reward", "end"):
        put(0, 2)
        put(("reward", "end").index(eff[0]), 2)
    else:
        put(1, 2)
        put(("remove", "teleport", "spawn").index(eff[0]), 3)
    if eff[0] == "reward":
        put(eff[1] - REWARD_MIN, 9)
    elif eff[0] == "remove":
        put(REMOVABLE.index(eff[1]), 4)
    elif eff[0] == "teleport":
        put(PIECES.index(eff[1]), 6)
        put(MODES.index(eff[2]), 2)
    elif eff[0] == "spawn":
        put(SPAWNABLE.index(eff[1]), 4)
        put(MODES.index(eff[2]), 2)
    else:
        put(RESULTS.index(eff[1]), 3)


def derive(source) -> GameDescription:
    """Build a game by walking the grammar, taking choices from `source`.

    `source.choose(n)` must return an index in [0, n).  Every derivation
    yields a valid description; the walk is self-delimiting.
    """
    c = source.choose
    w = GRID_MIN + c(7)
    h = GRID_MIN + c(7)
    players = 1 + c(2)
    if c(2) == 0:
        obs_mode, obs_radius = "full", 0
    else:
        obs_mode, obs_radius = "radius", 1 + c(3)
    noise = NOISE_LEVELS[c(4)]
    horizon = HORIZONS[c(5)]

    layout = []
    cell = c(w * h)
    layout.append(Placement("avatar", cell % w, cell // w))
    for kind in ("goal", "hazard", "item"):
        layout.extend(_derive_repeat(c, kind, w, h))
    has_opp = players == 2 or c(2) == 1
    if has_opp:
        cell = c(w * h)
        layout.append(Placement("opp", cell % w, cell // w))
    layout.extend(_derive_repeat(c, "wall", w, h))

    actions = _derive_actions(c, players)

    rules = []
    avail = _touch_partners(layout, ())
    arm = c(3)
    want = (0, 1, 2)[arm]
    while len(rules) < RULE_CAP:
        if len(rules) >= want and (want < 2 or c(2) == 0):
            break
        rules.append(_derive_rule(c, horizon, avail))
        avail = _touch_partners(layout, rules)

    opponent = None
    if players == 1 and has_opp:
        pol = OPP_POLICIES[c(4)]
        if pol == "random":
            opponent = ("random",)
        elif pol in ("chase", "flee"):
            opponent = (pol, "avatar")
        else:
            opponent = ("greedy", GREEDY_TARGETS[c(2)])

    step_delta = c(3) - 1
    win_reward = c(9)
    lose_reward = c(9) - 8

    return _build(dict(grid_w=w, grid_h=h, players=players, obs_mode=obs_mode,
                       obs_radius=obs_radius, noise=noise, horizon=horizon,
                       layout=layout, actions=actions, rules=rules,
                       opponent=opponent, step_delta=step_delta,
                       win_reward=win_reward, lose_reward=lose_reward))


def _derive_repeat(c, kind, w, h):
    occupied = set()
    out = []
    while len(occupied) < w * h:
        if c(2) == 0:
            break
        rank = c(w * h - len(occupied))
        cell = -1
        k = rank
        for cand in range(w * h):
            if cand in occupied:
                continue
            if k == 0:
                cell = cand
                break
            k -= 1
        occupied.add(cell)
        out.append(Placement(kind, cell % w, cell // w))
    return out


def _derive_rule(c, horizon, avail):
    if avail:
        arm = c(3)
        kind = ("overlap", "adjacent")[arm] if arm < 2 else ("count", "tick")[c(2)]
    else:
        kind = ("count", "tick")[c(2)]
    if kind in ("overlap", "adjacent"):
        cond = (kind, "avatar", avail[c(len(avail))])
    elif kind == "count":
        cond = ("count", REMOVABLE[c(4)], CMPS[c(3)], c(COUNT_MAX + 1))
    else:
        cond = ("tick", CMPS[c(3)], c(horizon + 1))
    effects = [_derive_effect(c)]
    while c(2) == 1:
        effects.append(_derive_effect(c))
    return Rule(cond, tuple(effects))


def _derive_effect(c):
    if c(2) == 0:
        kind = ("reward", "end")[c(2)]
    else:
        kind = ("remove", "teleport", "spawn")[c(3)]
    if kind == "reward":
        return ("reward", REWARD_MIN + c(9))
    if kind == "remove":
        return ("remove", REMOVABLE[c(4)])
    if kind == "teleport":
        return ("teleport", PIECES[c(6)], MODES[c(2)])
    if kind == "spawn":
        return ("spawn", SPAWNABLE[c(4)], MODES[c(2)])
    return ("end", RESULTS[c(3)])


# ── Reward bounds ─────────────────────────────────────────────────────

def compute_bounds(desc: GameDescription) -> RewardBounds:
    """Conservative static bounds on any reachable episode score.

    Each rule can fire at most once per tick, so its positive (negative)
    reward deltas contribute at most horizon times.
    """
    pos = neg = 0
    for rule in desc.rules:
        pos += sum(max(0, e[1]) for e in rule.effects if e[0] == "reward")
        neg += sum(min(0, e[1]) for e in rule.effects if e[0] == "reward")
    r_max = desc.win_reward + desc.horizon * max(0, desc.step_delta) + desc.horizon * pos
    r_min = desc.lose_reward + desc.horizon * min(0, desc.step_delta) + desc.horizon * neg
    if r_min == r_max:
        # Degenerate scoreless game: widen so normalization stays defined
        # (bounds remain conservative, every score is exactly r_min).
        r_max = r_min + 1
    return RewardBounds(r_min, r_max)
