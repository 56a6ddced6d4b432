"""
Exception hierarchy for MKMed

Every error carries an ``exit_code`` so the CLI can map failures to process
exit statuses without a lookup table.
"""


class MKMedError(Exception):
    """Base class for all MKMed errors"""
    exit_code = 1


# Configuration / CLI

class ConfigError(MKMedError, ValueError):
    """Invalid, missing or unknown configuration key"""
    exit_code = 2


# molkit

class SmilesError(MKMedError, ValueError):
    """SMILES string outside the supported grammar"""
    exit_code = 2


class UnsupportedToken(SmilesError):
    pass


class UnbalancedRing(SmilesError):
    pass


class UnbalancedBranch(SmilesError):
    pass


class EmptyInput(SmilesError):
    pass


class RelaxationFailure(MKMedError):
    """Conformer bond lengths out of bounds after relaxation"""


# encoders

class DimensionMismatch(MKMedError, ValueError):
    pass


class AllMasked(MKMedError, ValueError):
    pass


class BadPatchGrid(MKMedError, ValueError):
    pass


class TokenOutOfVocab(MKMedError, ValueError):
    pass


class EmptyKG(MKMedError, ValueError):
    pass


class UnknownEntity(MKMedError, KeyError):
    """Molecule has no KG modality (not fatal for alignment)"""


class DegenerateEdge(MKMedError, ValueError):
    pass


# align

class ZeroNormRow(MKMedError, ValueError):
    pass


class ModalityUnderfilled(MKMedError):
    pass


class NonFiniteLoss(MKMedError):
    exit_code = 3


class EmptyIntersection(MKMedError):
    exit_code = 4


# clinical / objective / eval

class VocabMismatch(MKMedError, ValueError):
    exit_code = 5


class IndexOutOfRange(MKMedError, IndexError):
    pass


class ShapeMismatch(MKMedError, ValueError):
    pass


class UnknownVariant(MKMedError, ValueError):
    exit_code = 2


class InvalidDDIMatrix(MKMedError, ValueError):
    """DDI matrix not square, not symmetric or with a nonzero diagonal"""
    exit_code = 2


class EmptyTestSet(MKMedError, ValueError):
    pass


class CorruptCheckpoint(MKMedError, ValueError):
    """Checkpoint file with a bad magic, header or block length"""
    exit_code = 2


# synthgen

class ExhaustedAttempts(MKMedError):
    pass
