"""Packetization, the lossy channel and delayed feedback."""
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fvstream import (ChannelError, Component, PacketId, build_schedule,
                      feedback_at, load_trace, lost_mb_mask, make_iid_trace,
                      packetize, save_trace)


class TestPacketize:
    @pytest.mark.example
    def test_even_split_16_into_4(self):
        assert packetize(16, 4) == [range(0, 4), range(4, 8),
                                    range(8, 12), range(12, 16)]

    @pytest.mark.example
    def test_uneven_split_puts_larger_packets_first(self):
        assert [len(r) for r in packetize(10, 4)] == [3, 3, 2, 2]

    def test_rejects_more_packets_than_blocks(self):
        with pytest.raises(ChannelError):
            packetize(16, 20)
        with pytest.raises(ChannelError):
            packetize(4, 12)

    def test_rejects_nonpositive_packet_count(self):
        with pytest.raises(ChannelError):
            packetize(16, 0)

    @given(st.integers(1, 400), st.integers(1, 60))
    def test_partition_covers_every_block_once(self, mb_count, packets):
        if packets > mb_count:
            with pytest.raises(ChannelError):
                packetize(mb_count, packets)
            return
        ranges = packetize(mb_count, packets)
        seen = [i for r in ranges for i in r]
        assert seen == list(range(mb_count))
        sizes = [len(r) for r in ranges]
        assert max(sizes) - min(sizes) <= 1
        assert sizes == sorted(sizes, reverse=True)


class TestSchedule:
    def test_raster_order_and_counts(self):
        sched = build_schedule(2, 3, 1)
        assert len(sched) == 2 * 2 * (3 + 1)
        assert sched[0] == PacketId(0, 0, Component.TEXTURE, 0)
        assert sched[3] == PacketId(0, 0, Component.DEPTH, 0)
        assert sched[4] == PacketId(0, 1, Component.TEXTURE, 0)
        assert sched[8] == PacketId(1, 0, Component.TEXTURE, 0)

    def test_rejects_nonpositive_counts(self):
        with pytest.raises(ChannelError):
            build_schedule(0, 1, 1)
        with pytest.raises(ChannelError):
            build_schedule(1, 0, 1)

    def test_component_labels(self):
        assert Component.TEXTURE.label == "texture"
        assert Component.from_label("depth") is Component.DEPTH
        with pytest.raises(ChannelError):
            Component.from_label("audio")


class TestTrace:
    def test_rate_zero_loses_nothing(self):
        sched = build_schedule(4, 4, 2)
        trace = make_iid_trace(1, 0.0, sched)
        assert not any(lost for _, lost in trace.entries)

    def test_rate_one_loses_everything_unprotected(self):
        sched = build_schedule(4, 4, 2)
        trace = make_iid_trace(1, 1.0, sched, protected_frames=(0,))
        for pid, lost in trace.entries:
            assert lost == (pid.frame_index != 0)

    def test_seed_determinism(self):
        sched = build_schedule(6, 4, 2)
        a = make_iid_trace(42, 0.3, sched)
        b = make_iid_trace(42, 0.3, sched)
        c = make_iid_trace(43, 0.3, sched)
        assert a.entries == b.entries
        assert a.entries != c.entries

    def test_empirical_rate_close_to_nominal(self):
        # 10000 packets at 10 percent: the seeded stream should land near it
        sched = build_schedule(250, 16, 4)
        assert len(sched) == 10000
        trace = make_iid_trace(7, 0.1, sched)
        rate = sum(lost for _, lost in trace.entries) / len(sched)
        assert abs(rate - 0.1) < 0.01

    def test_rejects_rate_outside_unit_interval(self):
        sched = build_schedule(1, 1, 1)
        with pytest.raises(ChannelError):
            make_iid_trace(1, 1.5, sched)

    def test_unknown_packet_raises(self):
        trace = make_iid_trace(1, 0.5, build_schedule(2, 2, 1))
        with pytest.raises(ChannelError):
            trace.lost(PacketId(9, 0, Component.TEXTURE, 0))

    def test_frame_count(self):
        trace = make_iid_trace(1, 0.5, build_schedule(5, 2, 1))
        assert trace.frame_count() == 5


class TestFeedback:
    @pytest.mark.example
    def test_nothing_known_before_one_round_trip(self):
        trace = make_iid_trace(3, 0.2, build_schedule(12, 4, 2))
        fb = feedback_at(trace, 3, 4)
        assert fb.horizon == -1
        assert fb.known == {}

    @pytest.mark.example
    def test_zero_rtt_knows_everything_sent(self):
        trace = make_iid_trace(3, 0.2, build_schedule(6, 4, 2))
        fb = feedback_at(trace, 5, 0)
        assert {pid.frame_index for pid in fb.known} == set(range(6))

    @pytest.mark.example
    def test_rtt_4_at_frame_10_covers_frames_0_to_6(self):
        trace = make_iid_trace(3, 0.2, build_schedule(12, 4, 2))
        fb = feedback_at(trace, 10, 4)
        assert fb.horizon == 6
        assert {pid.frame_index for pid in fb.known} == set(range(7))

    def test_knowledge_grows_monotonically(self):
        trace = make_iid_trace(9, 0.3, build_schedule(10, 3, 1))
        prev: set = set()
        for t in range(10):
            known = set(feedback_at(trace, t, 2).known)
            assert prev <= known
            prev = known

    def test_negative_rtt_rejected(self):
        trace = make_iid_trace(1, 0.0, build_schedule(2, 1, 1))
        with pytest.raises(ChannelError):
            feedback_at(trace, 3, -1)

    def test_feedback_matches_trace_outcomes(self):
        trace = make_iid_trace(11, 0.4, build_schedule(8, 4, 2))
        fb = feedback_at(trace, 7, 2)
        for pid, lost in fb.known.items():
            assert trace.lost(pid) == lost


class TestLostBlockMask:
    def test_mask_covers_exactly_the_lost_packets(self):
        sched = build_schedule(3, 4, 2)
        trace = make_iid_trace(21, 0.5, sched)
        mb_count = 10
        for t in range(3):
            for view in (0, 1):
                mask = lost_mb_mask(trace, t, view, Component.TEXTURE,
                                    mb_count, 4)
                want = np.zeros(mb_count, dtype=bool)
                for p, rng in enumerate(packetize(mb_count, 4)):
                    if trace.lost(PacketId(t, view, Component.TEXTURE, p)):
                        want[list(rng)] = True
                assert np.array_equal(mask, want)

    def test_clean_frame_has_empty_mask(self):
        trace = make_iid_trace(2, 0.0, build_schedule(2, 4, 2))
        assert not lost_mb_mask(trace, 1, 0, Component.DEPTH, 16, 4).any()


class TestTraceFiles:
    def test_round_trip_preserves_everything(self, tmp_path):
        sched = build_schedule(7, 5, 2)
        trace = make_iid_trace(99, 0.25, sched, protected_frames=(0,))
        path = tmp_path / "trace.txt"
        save_trace(path, trace)
        back = load_trace(path)
        assert back.seed == trace.seed
        assert back.loss_rate == trace.loss_rate
        assert back.generator == trace.generator
        assert back.protected_frames == trace.protected_frames
        assert back.entries == trace.entries

    def test_save_is_deterministic(self, tmp_path):
        trace = make_iid_trace(5, 0.1, build_schedule(3, 2, 1))
        a, b = tmp_path / "a.txt", tmp_path / "b.txt"
        save_trace(a, trace)
        save_trace(b, trace)
        assert a.read_bytes() == b.read_bytes()
