from .client import delete_interface2, push_interface1, push_interface2
from .synth import NON_SYNC_SAMPLE_FLAGS, SYNC_SAMPLE_FLAGS, SynthSpec, SynthTrack, synth_track

__all__ = [
    "NON_SYNC_SAMPLE_FLAGS",
    "SYNC_SAMPLE_FLAGS",
    "SynthSpec",
    "SynthTrack",
    "delete_interface2",
    "push_interface1",
    "push_interface2",
    "synth_track",
]
