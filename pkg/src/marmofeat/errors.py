"""Exception hierarchy.

Two families matter to callers: data problems (bad files, bad manifests,
labels that cannot be split) and numeric failures (non-finite values during
training). The CLI maps them onto distinct exit codes.
"""


class MarmofeatError(Exception):
    """Base class for all toolkit errors."""


class DataError(MarmofeatError):
    """Input data is missing, malformed or unusable."""


class AudioError(DataError):
    pass


class UnsupportedEncodingError(AudioError):
    pass


class ManifestError(DataError):
    pass


class EmbeddingFormatError(DataError):
    pass


class TruncatedPayloadError(EmbeddingFormatError):
    pass


class MissingEmbeddingError(DataError):
    def __init__(self, segment_id: str, layer: int, path=None):
        self.segment_id = segment_id
        self.layer = layer
        self.path = path
        super().__init__(f"missing embedding for segment {segment_id!r} layer {layer}"
                         + (f" ({path})" if path is not None else ""))


class SeriesTooShortError(DataError):
    pass


class InsufficientClassesError(DataError):
    pass


class SplitError(DataError):
    pass


class CheckpointError(DataError):
    pass


class NumericError(MarmofeatError):
    """Non-finite values appeared during computation."""


class NonFiniteActivationError(NumericError):
    def __init__(self, layer_index: int, layer_name: str):
        self.layer_index = layer_index
        self.layer_name = layer_name
        super().__init__(f"non-finite activation at layer {layer_index} ({layer_name})")


class DivergenceError(NumericError):
    pass
