import random
import warnings

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from passdown.complexes import (
    DisconnectedComplexWarning,
    covolume,
    cutpoint_tree,
    cutpoints,
    h1_z2,
    is_connected,
    make_complex,
    reduce_complex,
    reduced_cutpoint_tree,
)
from passdown.errors import FixtureError
from passdown.groups import GroupRef, GroupTable

from generators import random_cell_complex, random_simplicial_complex
from oracles import brute_cutpoints, h1_rank_oracle


def triangle(marked=()):
    return make_complex(
        ["a", "b", "c"],
        {"ab": ("a", "b"), "bc": ("b", "c"), "ac": ("a", "c")},
        {"t": ("ab", "bc", "ac")},
        boundary_marked=marked,
    )


def test_validation_rejects_missing_edge():
    with pytest.raises(FixtureError):
        make_complex(["a", "b"], {"ab": ("a", "b")}, {"t": ("ab", "bc", "ac")})


def test_validation_rejects_open_face():
    with pytest.raises(FixtureError):
        make_complex(
            ["a", "b", "c", "d"],
            {"ab": ("a", "b"), "bc": ("b", "c"), "cd": ("c", "d")},
            {"t": ("ab", "bc", "cd")},
        )


class TestReduce:
    def test_bigon_collapses_to_single_edge(self):
        x = make_complex(
            ["u", "v"],
            {"e1": ("u", "v"), "e2": ("u", "v")},
            {"b": ("e1", "e2")},
        )
        r = reduce_complex(x)
        assert r.vertices == frozenset({"u", "v"})
        assert len(r.edges) == 1
        assert not r.faces

    def test_simplicial_input_unchanged(self):
        x = triangle()
        r = reduce_complex(x)
        assert r.vertices == x.vertices
        assert set(map(frozenset, r.edges.values())) == set(map(frozenset, x.edges.values()))
        assert len(r.faces) == 1
        assert covolume(r) == covolume(x)

    def test_triangle_with_doubled_side(self):
        # hand enumeration: 3 vertices, 4 edges (one doubled), 1 triangle
        # reduces to the plain triangle on the same vertices
        x = make_complex(
            ["a", "b", "c"],
            {"ab": ("a", "b"), "ab2": ("a", "b"), "bc": ("b", "c"), "ac": ("a", "c")},
            {"t": ("ab", "bc", "ac")},
        )
        r = reduce_complex(x)
        assert len(r.edges) == 3
        assert len(r.faces) == 1
        assert set(r.face_vertices(next(iter(r.faces)))) == {"a", "b", "c"}

    def test_merged_triangles_drop_covolume(self):
        x = make_complex(
            ["a", "b", "c"],
            {"ab": ("a", "b"), "ab2": ("a", "b"), "bc": ("b", "c"), "ac": ("a", "c")},
            {"t1": ("ab", "bc", "ac"), "t2": ("ab2", "bc", "ac")},
            orbit={"t1": "o1", "t2": "o2"},
        )
        assert covolume(x) == 2
        r = reduce_complex(x)
        assert covolume(r) == 1


class TestH1:
    def test_hollow_triangle_is_circle(self):
        x = make_complex(
            ["a", "b", "c"],
            {"ab": ("a", "b"), "bc": ("b", "c"), "ac": ("a", "c")},
            {},
        )
        assert h1_z2(x) == 1

    def test_filled_triangle_is_disk(self):
        assert h1_z2(triangle()) == 0

    def test_disconnected_warns(self):
        x = make_complex(["a", "b"], {}, {})
        with pytest.warns(DisconnectedComplexWarning):
            assert h1_z2(x) == 0

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10**9))
    def test_matches_rank_oracle(self, seed):
        x = random_simplicial_complex(random.Random(seed))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DisconnectedComplexWarning)
            assert h1_z2(x) == h1_rank_oracle(x)


class TestCovolume:
    def test_no_triangles(self):
        x = make_complex(["a", "b"], {"ab": ("a", "b")}, {})
        assert covolume(x) == 0

    def test_distinct_orbits(self):
        rng = random.Random(1)
        x = random_simplicial_complex(rng)
        assert covolume(x) == len({x.orbit[f] for f in x.triangles()})

    def test_six_triangles_three_orbits(self):
        verts = [f"v{i}" for i in range(9)] + ["hub"]
        edges, faces, orbit = {}, {}, {}
        names = ["a", "a", "b", "b", "b", "c"]
        for i in range(6):
            u, v = f"v{i}", f"v{(i + 1) % 9 + 2}"
            edges[f"h{i}u"] = ("hub", u)
            edges[f"h{i}v"] = ("hub", v)
            edges[f"{i}uv"] = (u, v)
            faces[f"t{i}"] = (f"h{i}u", f"{i}uv", f"h{i}v")
            orbit[f"t{i}"] = names[i]
        x = make_complex(verts, edges, faces, orbit=orbit)
        assert covolume(x) == 3


class TestCutpoints:
    def wedge(self):
        return make_complex(
            ["a", "b", "v", "c", "d"],
            {
                "av": ("a", "v"),
                "ab": ("a", "b"),
                "bv": ("b", "v"),
                "vc": ("v", "c"),
                "cd": ("c", "d"),
                "vd": ("v", "d"),
            },
            {"t1": ("av", "ab", "bv"), "t2": ("vc", "cd", "vd")},
        )

    def test_two_triangles_sharing_vertex(self):
        assert cutpoints(self.wedge()) == {"v"}

    def test_single_triangle_has_none(self):
        assert cutpoints(triangle()) == set()

    def test_chain_of_three_triangles(self):
        # glued at two distinct vertices; brute-force deletion agrees
        x = make_complex(
            ["a", "b", "v", "c", "w", "d", "e"],
            {
                "ab": ("a", "b"),
                "av": ("a", "v"),
                "bv": ("b", "v"),
                "vc": ("v", "c"),
                "vw": ("v", "w"),
                "cw": ("c", "w"),
                "wd": ("w", "d"),
                "we": ("w", "e"),
                "de": ("d", "e"),
            },
            {"t1": ("ab", "av", "bv"), "t2": ("vc", "vw", "cw"), "t3": ("wd", "we", "de")},
        )
        assert cutpoints(x) == {"v", "w"} == brute_cutpoints(x)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10**9))
    def test_matches_brute_force(self, seed):
        x = random_simplicial_complex(random.Random(seed))
        assert cutpoints(x) == brute_cutpoints(x)


class TestCutpointTree:
    def test_cutpoint_free_is_single_vertex(self):
        bx = cutpoint_tree(triangle())
        assert len(bx.comp_nodes) == 1 and not bx.cut_nodes and not bx.edges

    def test_wedge_is_path(self):
        bx = cutpoint_tree(TestCutpoints().wedge())
        assert len(bx.comp_nodes) == 2
        assert bx.cut_nodes == ("v",)
        assert len(bx.edges) == 2
        assert bx.is_tree()

    def test_wedge_of_three_and_collapse(self):
        verts, edges, faces = ["v"], {}, {}
        for k, (a, b) in enumerate([("a1", "b1"), ("a2", "b2"), ("a3", "b3")]):
            verts += [a, b]
            edges[f"va{k}"] = ("v", a)
            edges[f"vb{k}"] = ("v", b)
            edges[f"ab{k}"] = (a, b)
            faces[f"t{k}"] = (f"va{k}", f"ab{k}", f"vb{k}")
        groups = GroupTable([GroupRef("Big")])  # not slender
        x = make_complex(verts, edges, faces, stab={"v": "Big"}, groups=groups)
        bx = cutpoint_tree(x, groups)
        assert len(bx.comp_nodes) == 3 and len(bx.edges) == 3  # star with 3 leaves
        bpx = reduced_cutpoint_tree(x, groups)
        # the non-slender cut vertex merges everything into one node
        assert len(bpx.comp_nodes) == 1 and not bpx.cut_nodes

    def test_slender_cut_vertex_survives_reduction(self):
        x = TestCutpoints().wedge()
        bpx = reduced_cutpoint_tree(x)
        assert bpx.cut_nodes == ("v",)
        assert len(bpx.comp_nodes) == 2


class TestReductionProperties:
    @settings(max_examples=80, deadline=None)
    @given(st.integers(0, 10**9))
    def test_idempotent_monotone_and_h1_preserving(self, seed):
        x = random_cell_complex(random.Random(seed))
        r = reduce_complex(x)
        r2 = reduce_complex(r)
        assert r2.vertices == r.vertices
        assert set(map(frozenset, r2.edges.values())) == set(map(frozenset, r.edges.values()))
        assert {frozenset(r2.face_vertices(f)) for f in r2.faces} == {
            frozenset(r.face_vertices(f)) for f in r.faces
        }
        assert covolume(r) <= covolume(x)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DisconnectedComplexWarning)
            if is_connected(x):
                assert is_connected(r)
                if h1_z2(x) == 0:
                    assert h1_z2(r) == 0
