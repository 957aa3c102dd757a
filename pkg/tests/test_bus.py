import json

import numpy as np
import pytest

from dotswarm.bus import (RELIABLE, Bus, NamespaceError, QoS, UnknownTopicError, best_effort, namespace_of,
                          poll, publish, robot_topic, subscribe)


def test_namespace_parsing():
    assert namespace_of(robot_topic(3, "cmd_vel")) == 3
    assert namespace_of("swarm/announce") is None
    assert namespace_of("robot_x/foo") is None


def test_qos_rules():
    b = Bus()
    assert b.register(robot_topic(0, "odom"), "Odom").qos == RELIABLE
    assert not b.register("swarm/hello", "Str").qos.reliable
    with pytest.raises(ValueError):
        b.register(robot_topic(0, "scan"), "Scan", best_effort())
    with pytest.raises(ValueError):
        b.register("swarm/x", "Str", RELIABLE)
    with pytest.raises(ValueError):
        QoS(True, 0.1)
    with pytest.raises(ValueError):
        b.register(robot_topic(0, "odom"), "Other")


def test_private_namespace():
    b = Bus()
    b.register(robot_topic(1, "cmd"), "Twist")
    subscribe(b, robot_topic(1, "cmd"), robot=1)
    subscribe(b, robot_topic(1, "cmd"))  # the simulator may listen anywhere
    with pytest.raises(NamespaceError):
        subscribe(b, robot_topic(1, "cmd"), robot=2)
    with pytest.raises(UnknownTopicError):
        subscribe(b, "nope")
    with pytest.raises(UnknownTopicError):
        publish(b, "nope", 1, 0.0)


def test_reliable_delivery_in_order():
    b = Bus()
    t = robot_topic(0, "x")
    b.register(t, "Int")
    s = subscribe(b, t, 0)
    for i in range(100):
        assert publish(b, t, i, i * 0.01)
    assert poll(s, 10.0) == list(range(100))
    assert s.pending() == 0


def test_delivery_time_and_fifo():
    b = Bus()
    t = robot_topic(0, "x")
    b.register(t, "Int")
    s = subscribe(b, t, 0)
    b.publish(t, "late", 0.0, "p", deliver_at=0.5)
    b.publish(t, "early", 0.1, "p", deliver_at=0.2)
    assert poll(s, 0.4) == []
    env = s.poll_envelopes(0.5)
    assert [e.payload for e in env] == ["late", "early"]
    assert env[1].delivered == 0.5 and env[1].emitted == 0.1


def test_best_effort_drop_rate():
    b = Bus(np.random.default_rng(7))
    b.register("swarm/beat", "Int", best_effort(0.05))
    s = subscribe(b, "swarm/beat", 0)
    sent = sum(publish(b, "swarm/beat", i, 0.0) for i in range(20_000))
    assert len(poll(s, 0.0)) == sent
    assert abs(1 - sent / 20_000 - 0.05) < 0.006


def test_dump_topics_sorted():
    b = Bus()
    b.register("swarm/b", "Str")
    b.register(robot_topic(0, "a"), "Str")
    rows = json.loads(b.dump_topics())
    assert [r["topic"] for r in rows] == ["robot_0/a", "swarm/b"]
    assert rows[1]["qos"] == "BEST_EFFORT(0.05)"
