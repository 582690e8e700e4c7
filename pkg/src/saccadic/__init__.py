"""Saccadic indicator-graph learning on 1-D quasi-periodic signals."""
__version__ = "0.1.0"

from .errors import BoundaryError, ExperimentError, SaccadeError, ValidationError
from .signals import (AnnotationSet, Signal, SynthEcgParams, Wave, load_annotations, load_signal,
                     save_annotations, save_signal, synth_ecg)
from .fragments import (Control, Fragment, FragmentCloud, collect_control_results, execute_control,
                        extract_fragment, jitter_centers, sample_background)
from .embedding import (Embedding2D, PcaModel, SeparabilityReport, knn_entropy, nn_purity, pca_fit,
                        pca_project, separability, tsne_embed)
from .indicator import (Indicator, TriggerResult, fit_initial_indicator, make_point_indicator,
                        microsaccade_search, trigger)
from .graph import (CompositeIndicator, ControlProfile, IndicatorGraph, evaluate_composite,
                    find_characteristic_controls, grow_indicator, one_shot_learn, scan_controls)
