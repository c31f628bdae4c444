"""Exception hierarchy.

The CLI maps these onto exit codes: ``ParseError`` and friends are input
problems (2), ``SemanticError`` covers well-formed but unusable requests (3)
and ``InvariantError`` signals a bug or a failed self-check (4).
"""


class TromuxError(Exception):
    pass


class ParseError(TromuxError):
    pass


class LibraryError(ParseError):
    pass


class DuplicateGateType(LibraryError):
    pass


class AsymmetricComplement(LibraryError):
    pass


class NotComplementary(LibraryError):
    pass


class MissingDefaultCell(LibraryError):
    pass


class NegativeValue(LibraryError):
    pass


class NetlistError(ParseError):
    pass


class MultipleDrivers(NetlistError):
    pass


class UndefinedNet(NetlistError):
    pass


class CombinationalCycle(NetlistError):
    pass


class UnknownGateType(NetlistError):
    pass


class DuplicateName(NetlistError):
    pass


class SemanticError(TromuxError):
    pass


class UnknownNet(SemanticError, KeyError):
    pass


class UnknownCell(SemanticError, KeyError):
    pass


class UnsupportedCell(SemanticError):
    pass


class AlreadyLocked(SemanticError):
    pass


class UnknownAsset(SemanticError):
    pass


class KeyLengthMismatch(SemanticError):
    pass


class InputWidthMismatch(SemanticError):
    pass


class InsufficientSites(SemanticError):
    pass


class NoDecomposition(SemanticError):
    pass


class NoKeyGates(SemanticError):
    pass


class InvariantError(TromuxError):
    pass
