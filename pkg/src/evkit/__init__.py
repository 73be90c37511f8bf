"""Event-camera vibration analysis and phase-based motion magnification.

Two pipelines share this package: per-pixel frequency estimation from
polarity-transition intervals of an event stream, and Eulerian motion
magnification of grayscale frame sequences through a complex steerable
pyramid with temporal phase filtering. A synthetic generator provides
the ground truth both are validated against.
"""

from .errors import DegenerateFrameError, EvkitError, OrderError, ParseError
from .model import (Event, EventBatch, EventStream, Polarity, SensorGeometry,
                    batch_events, validate_stream)
from .codec import (decode_csv, decode_evs1, encode_csv, encode_evs1,
                    read_stream, write_stream)
from .frames import FrameSequence, load_frame_dir, read_pgm, save_frame_dir, write_pgm
from .synth import (Rect, SensorModel, make_pattern, synth_flicker,
                    synth_from_frames, synth_moving_pattern, translate_exact)
from .filters import (ErcConfig, FlickerBand, StcConfig, anti_flicker,
                      erc_decimate, refractory_filter, stc_filter)
from .freqmap import (FreqMapConfig, FreqState, FrequencyMap, PixelTransitionState,
                      Transition, compute_freq_map, estimate_frequency,
                      freq_histogram, merge_freq_maps, render_freq_map,
                      stream_freq_maps, update_pixel_state)
from .steerable import (FilterBank, Pyramid, build_filter_bank, decompose,
                        reconstruct, shift_phase)
from .magnify import (MagnifyParams, TemporalFilter, design_temporal_filter,
                      denoise_phase, magnify_sequence, measure_displacement,
                      phase_delta, register_translation, transient_mask)

__version__ = "0.1.0"
