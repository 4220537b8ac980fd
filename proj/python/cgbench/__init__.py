"""Python interface to the cgbench core."""

import json as _json

from . import _cgbench
from ._cgbench import BenchError, word_count, dialogue_act

__all__ = [
    "BenchError",
    "analyze",
    "audit",
    "canonical_dump",
    "chi_square_2x2",
    "config_hashes",
    "default_config",
    "dialogue_act",
    "format_command",
    "mann_whitney_u",
    "parse_commands",
    "permutation_test",
    "references",
    "selfplay",
    "word_count",
]


def default_config():
    return _json.loads(_cgbench.default_config())


def config_hashes(config_path=""):
    return _cgbench.config_hashes(str(config_path))


def canonical_dump(doc):
    return _cgbench.canonical_dump(_json.dumps(doc))


def parse_commands(text):
    """Returns {"commands": [...], "errors": [...]}."""
    return _json.loads(_cgbench.parse_commands(text))


def format_command(command):
    return _cgbench.format_command(_json.dumps(command))


def references(text, actor="helper", config_path=""):
    return _json.loads(_cgbench.references(text, actor, str(config_path)))


def mann_whitney_u(x, y):
    return _json.loads(_cgbench.mann_whitney_u(list(x), list(y)))


def chi_square_2x2(table):
    (a, b), (c, d) = table
    return _json.loads(_cgbench.chi_square_2x2(a, b, c, d))


def permutation_test(a, b, n_perm=0, seed=0):
    return _json.loads(_cgbench.permutation_test(list(a), list(b), n_perm, seed))


def selfplay(out_dir, sessions_per_cell=1, seed=0, helper="oracle", worker="oracle",
             views=(), roles=(), jobs=1, config_path=""):
    return _json.loads(_cgbench.selfplay(str(out_dir), sessions_per_cell, seed, helper, worker,
                                         list(views), list(roles), jobs, str(config_path)))


def analyze(corpus, out_dir="", n_perm=10000, seed=0, jobs=1, config_path=""):
    return _json.loads(_cgbench.analyze(str(corpus), str(out_dir), n_perm, seed, jobs, str(config_path)))


def audit(corpus, config_path=""):
    return _json.loads(_cgbench.audit(str(corpus), str(config_path)))
