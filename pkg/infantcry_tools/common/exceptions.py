#  exceptions.py - this file is part of the infantcry_tools package.
#  Copyright (C) 2024- infantcry_tools developers
#
#  This program is free software: you can redistribute it and/or modify
#  it under the terms of the GNU General Public License as published by
#  the Free Software Foundation, either version 3 of the License, or
#  (at your option) any later version.
#
#  This program is distributed in the hope that it will be useful,
#  but WITHOUT ANY WARRANTY; without even the implied warranty of
#  MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the
#  GNU General Public License for more details.
#
#  You should have received a copy of the GNU General Public License
#  along with this program. If not, see <https://www.gnu.org/licenses/>.


class InfantCryError(Exception):
    """Base class of every error raised by the package.

    Each subclass carries the process exit code the command line maps it to.
    """
    exit_code = 1


class ValidationError(InfantCryError, ValueError):
    """Invalid configuration, argument or data shape."""
    exit_code = 1


class IoError(InfantCryError, OSError):
    """Unreadable, unwritable or malformed file."""
    exit_code = 2


class NumericError(InfantCryError, ArithmeticError):
    """Non-finite values during training."""
    exit_code = 3


# validation
class ConfigError(ValidationError):
    pass


class CheckpointMismatch(ValidationError):
    pass


class LabelSetMismatch(ValidationError):
    pass


class SampleRateMismatch(ValidationError):
    pass


class ClipTooShort(ValidationError):
    pass


class BadFrequencyRange(ValidationError):
    pass


class ShapeMismatch(ValidationError):
    pass


class DegenerateBatch(ValidationError):
    pass


class NotNormalized(ValidationError):
    pass


class EmptySequence(ValidationError):
    pass


class HeadMismatch(ValidationError):
    pass


class InvalidWidth(ValidationError):
    pass


class InputTooSmall(ValidationError):
    pass


class BadSpec(ValidationError):
    pass


class EmptyDataset(ValidationError):
    pass


class EmptyList(ValidationError):
    pass


# i/o
class UnsupportedFormat(IoError):
    pass


class CorruptHeader(IoError):
    pass


class BadMagic(IoError):
    pass


class VersionMismatch(IoError):
    pass


class ChecksumMismatch(IoError):
    pass


class InvalidClip(ValidationError):
    pass
