#!/usr/bin/env python3
"""
Tests for the Brick graph layer: ontology lookups, reciprocal materialization,
copy-on-write snapshots, frozen graphs, transitive traversal and persistence.
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from rdflib import Literal, URIRef

from brickyard.exceptions import (
    GraphPublishedError,
    InvalidArgumentError,
    OntologyError,
    ParseError,
    UnknownClassError,
    UnknownRelationError,
)
from brickyard.graph import BRICK, PROP, REF, GraphStore, load_ontology
from conftest import fixture_text

N = "urn:test:"


def test_ontology_hierarchy_and_tags(ontology):
    """isa closure includes the class itself; tag lookup needs every tag."""
    ahu_family = ontology.subclasses_of(str(BRICK.Air_Handling_Unit))
    assert str(BRICK.AHU) in ahu_family
    assert str(BRICK.Air_Handling_Unit) in ahu_family

    outside = ontology.classes_matching_tags(["Outside", "Temperature", "Sensor"])
    assert str(BRICK.Outside_Air_Temperature_Sensor) in outside
    assert str(BRICK.Supply_Air_Temperature_Sensor) not in outside

    assert ontology.is_point_class(str(BRICK.Zone_Air_Temperature_Sensor))
    assert not ontology.is_point_class(str(BRICK.AHU))

    with pytest.raises(UnknownClassError):
        ontology.subclasses_of(str(BRICK.Flux_Capacitor))


def test_relations_have_reciprocals(ontology):
    """Every relation names an inverse that is itself a relation pointing back."""
    for name, relation in ontology.relations.items():
        inverse = ontology.relation(relation.inverse)
        assert inverse is not None, name
        assert inverse.inverse == name
    assert ontology.relation(str(BRICK.feeds)).cyclic_allowed
    assert not ontology.relation(str(BRICK.hasPart)).cyclic_allowed


def test_ontology_cycle_rejected():
    """A subclass cycle makes the ontology unusable."""
    document = (
        "brick:A a owl:Class ; rdfs:subClassOf brick:B .\n"
        "brick:B a owl:Class ; rdfs:subClassOf brick:A .\n"
    )
    with pytest.raises(OntologyError):
        load_ontology(document)


def test_assert_materializes_inverse(graphs):
    """Asserting feeds stores isFedBy; repeating the batch adds nothing."""
    gid = graphs.create_graph("urn:graph:inverse")
    triples = [(N + "ahu", str(BRICK.feeds), N + "vav")]
    assert graphs.assert_triples(gid, triples) == 2
    assert graphs.assert_triples(gid, triples) == 0
    assert graphs.scan(gid, N + "vav", str(BRICK.isFedBy), N + "ahu")


def test_relation_object_must_be_entity(graphs):
    """A literal on the object side of a relation is rejected before any write."""
    gid = graphs.create_graph("urn:graph:literal")
    with pytest.raises(InvalidArgumentError):
        graphs.assert_triples(gid, [
            (N + "a", str(BRICK.hasPart), N + "b"),
            (N + "a", str(BRICK.feeds), Literal("nope")),
        ])
    assert graphs.scan(gid) == []


def test_entity_properties_and_types(graphs):
    """prop:* values come back as Python values keyed by local name."""
    gid = graphs.create_graph("urn:graph:props")
    graphs.assert_triples(gid, [
        (N + "t", "http://www.w3.org/1999/02/22-rdf-syntax-ns#type", str(BRICK.Zone_Air_Temperature_Sensor)),
        (N + "t", str(PROP.rangeMin), 5),
        (N + "t", str(PROP.rangeMax), 35.5),
        (N + "t", str(REF.timeseries), Literal("s/t")),
    ])
    assert graphs.entity_properties(gid, N + "t") == {"rangeMin": 5, "rangeMax": 35.5}
    assert graphs.types_of(gid, N + "t") == {str(BRICK.Zone_Air_Temperature_Sensor)}
    assert N + "t" in graphs.entities_of_type(gid, str(BRICK.Temperature_Sensor))
    assert N + "t" not in graphs.entities_of_type(gid, str(BRICK.Temperature_Sensor), include_subclasses=False)


def test_snapshot_is_isolated_from_later_writes(graphs):
    """A reader's snapshot never sees a batch committed after it was taken."""
    gid = graphs.create_graph("urn:graph:cow")
    graphs.assert_triples(gid, [(N + "a", str(BRICK.hasPart), N + "b")])
    before = graphs.snapshot(gid)
    size = len(before)
    graphs.assert_triples(gid, [(N + "a", str(BRICK.hasPart), N + "c")])
    assert len(before) == size
    assert len(graphs.snapshot(gid)) == size + 2


def test_frozen_graph_rejects_writes(graphs):
    """Published graphs are immutable and cannot be dropped."""
    gid = graphs.create_graph("urn:graph:frozen")
    graphs.assert_triples(gid, [(N + "a", str(BRICK.feeds), N + "b")])
    graphs.freeze(gid)
    with pytest.raises(GraphPublishedError):
        graphs.assert_triples(gid, [(N + "b", str(BRICK.feeds), N + "c")])
    with pytest.raises(GraphPublishedError):
        graphs.drop_graph(gid)


def test_transitive_reach_on_cycle(graphs):
    """A feeds loop terminates; the start comes back once a walk returns to it."""
    gid = graphs.create_graph("urn:graph:loop")
    feeds = str(BRICK.feeds)
    graphs.assert_triples(gid, [(N + "a", feeds, N + "b"), (N + "b", feeds, N + "c"), (N + "c", feeds, N + "a")])
    assert graphs.transitive_reach(gid, N + "a", feeds) == {N + "a", N + "b", N + "c"}
    assert graphs.transitive_reach(gid, N + "a", feeds, 1, 1) == {N + "b"}
    assert graphs.transitive_reach(gid, N + "a", feeds, 2, 2) == {N + "c"}
    with pytest.raises(UnknownRelationError):
        graphs.transitive_reach(gid, N + "a", str(BRICK.teleportsTo))
    with pytest.raises(InvalidArgumentError):
        graphs.transitive_reach(gid, N + "a", feeds, 3, 2)


def walk_oracle(edges, start, min_hops, max_hops, node_count):
    """Nodes ending a walk whose length is in [min_hops, max_hops], by brute force."""
    limit = min_hops + node_count if max_hops is None else max_hops
    frontier, found = {start}, set()
    for step in range(1, limit + 1):
        frontier = {b for a, b in edges if a in frontier}
        if step >= min_hops:
            found |= frontier
    return found


@settings(max_examples=200, deadline=None)
@given(
    edges=st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), max_size=14),
    start=st.integers(0, 5),
    min_hops=st.integers(1, 3),
    extra=st.one_of(st.none(), st.integers(0, 4)),
)
def test_transitive_reach_matches_walk_oracle(ontology, edges, start, min_hops, extra):
    """Bounded and unbounded traversal agree with explicit walk enumeration."""
    store = GraphStore(ontology)
    gid = store.create_graph("urn:graph:random")
    feeds = str(BRICK.feeds)
    named = {(f"{N}{a}", f"{N}{b}") for a, b in edges}
    store.assert_triples(gid, [(a, feeds, b) for a, b in named])
    max_hops = None if extra is None else min_hops + extra
    node_count = len({n for e in named for n in e})

    expected = walk_oracle(named, f"{N}{start}", min_hops, max_hops, node_count)
    assert store.transitive_reach(gid, f"{N}{start}", feeds, min_hops, max_hops) == expected


def test_model_document_parse_error_has_line(graphs):
    """Malformed Turtle reports a line number inside the caller's document."""
    with pytest.raises(ParseError) as info:
        graphs.parse_model_document("<urn:x#a> a brick:AHU .\n<urn:x#b> a brick:VAV\n<urn:x#c> ;; ]] .\n")
    assert info.value.line is not None and info.value.line >= 1


def test_flush_and_restore(tmp_path, ontology):
    """Graph content and frozen flags survive a restart."""
    store = GraphStore(ontology, tmp_path)
    gid = store.create_graph("urn:graph:persisted")
    store.assert_triples(gid, store.parse_model_document(fixture_text("figure2_hvac.ttl")))
    store.freeze(gid)
    store.flush()

    reopened = GraphStore(ontology, tmp_path)
    assert reopened.restore() == 1
    assert set(reopened.snapshot(gid)) == set(store.snapshot(gid))
    assert reopened.is_frozen(gid)
    assert (URIRef("urn:fixture:hvac#ahu0"), BRICK.feeds, URIRef("urn:fixture:hvac#vav_g01")) in reopened.snapshot(gid)


def test_snapshot_files_are_reproducible(tmp_path, graphs):
    """Writing the same graph twice gives byte-identical files."""
    gid = graphs.create_graph("urn:graph:bytes")
    graphs.assert_triples(gid, graphs.parse_model_document(fixture_text("figure2_hvac.ttl")))
    first = graphs.write_snapshot(gid, tmp_path / "a.tsv").read_bytes()
    second = graphs.write_snapshot(gid, tmp_path / "b.tsv").read_bytes()
    assert first == second
