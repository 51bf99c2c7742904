from hypothesis import strategies as st

from control_engine.control_space import ControlSchedule


def schedules(channels: int = 2, max_segments: int = 4):
    """Piecewise-constant schedules on a shared grid."""
    segment = st.tuples(
        st.floats(min_value=0.01, max_value=1.0),
        st.lists(st.floats(min_value=-2.0, max_value=2.0), min_size=channels, max_size=channels),
    )
    return st.lists(segment, min_size=0, max_size=max_segments).map(
        lambda segs: ControlSchedule.from_segments(segs, channels=channels)
    )
