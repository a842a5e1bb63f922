"""Ready-made models."""
from __future__ import annotations

from .modelfile import parse_model

SINGLE_SLOT = """\
# One slot R, filled by x or y.  A Fern commits with i_x / i_y, a Wilbur
# pledges availability of each candidate together with its commit.
blocks x y i_x i_y a_x a_y
attest a_x store alice x i_x
attest a_y store alice y i_y
attest i_x commit fern R x
attest i_y commit fern R y
adds R = {} {x i_x} {y i_y}
trust store alice
trust commit fern
universes all
"""


def single_slot_model():
    return parse_model(SINGLE_SLOT)
