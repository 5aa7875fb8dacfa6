"""Bundled demonstration graphs backing the ``repro`` subcommand.

Each entry is a small named scenario: pairs related by cycle reversal
(fig2, fig6, fig7), a three-member Markov class (fig3), the worked
imset-table pair (fig4, also rendered by ``repro table-cs``), and a
two-member imset class that no covered flip or cycle reversal connects
(fig5).
"""

from __future__ import annotations

from .graphs import DirectedGraph, mask_from_nodes


def _g(n: int, *parent_sets: tuple[int, ...]) -> DirectedGraph:
    return DirectedGraph(n, tuple(mask_from_nodes(ps) for ps in parent_sets))


# Covariance-equivalent pair with different skeletons (so different imsets),
# related by reversing the cycle (2,3,4).
FIG2_G = _g(4, (), (4,), (1, 2), (3,))
FIG2_H = _g(4, (), (1, 3), (4,), (2,))

# Three Markov-equivalent DAGs joined by flipping 4->3 and then 3->2.
FIG3_LEFT = _g(4, (2, 3, 4), (3,), (4,), ())
FIG3_MIDDLE = _g(4, (2, 3, 4), (3,), (), (3,))
FIG3_RIGHT = _g(4, (2, 3, 4), (), (2,), (3,))

# Cyclic pair with equal characteristic and standard imsets.
FIG4_LEFT = _g(4, (4,), (1,), (1, 2), (2, 3))
FIG4_RIGHT = _g(4, (2, 3), (3, 4), (4,), (1,))

# Imset class of size 2 not connected by flips or cycle reversals.
FIG5_LEFT = _g(5, (2, 4), (3, 5), (1, 5), (2, 5), (1, 4))
FIG5_RIGHT = _g(5, (3, 5), (1, 4), (2, 5), (1, 5), (2, 4))

# The 3-cycle and its reversal.
FIG6_LEFT = _g(3, (3,), (1,), (2,))
FIG6_RIGHT = _g(3, (2,), (3,), (1,))

# 6-node tournaments: equal skeletons, imsets differing at {2,3,5} only,
# yet numerically covariance equivalent.
FIG7_LEFT = _g(6, (4, 5), (1, 5, 6), (1, 2), (2, 3, 5), (3, 6), (1, 3, 4))
FIG7_RIGHT = _g(6, (2, 3), (3, 4, 5), (5, 6), (1, 3, 6), (1, 4), (1, 2, 5))

GRAPHS: dict[str, DirectedGraph] = {
    "fig2_g": FIG2_G,
    "fig2_h": FIG2_H,
    "fig3_left": FIG3_LEFT,
    "fig3_middle": FIG3_MIDDLE,
    "fig3_right": FIG3_RIGHT,
    "fig4_left": FIG4_LEFT,
    "fig4_right": FIG4_RIGHT,
    "fig5_left": FIG5_LEFT,
    "fig5_right": FIG5_RIGHT,
    "fig6_left": FIG6_LEFT,
    "fig6_right": FIG6_RIGHT,
    "fig7_left": FIG7_LEFT,
    "fig7_right": FIG7_RIGHT,
}
