"""
Dictionary cache for the power-profile dictionary.
Handles saving the offline-built dictionary and loading it back for sweeps.

File layout: magic b"PWRDICT1", little-endian uint32 header length, UTF-8
JSON header, then num_cells * num_angles little-endian float64 atoms in
row-major order.
"""

import json
import logging
import math
import os
import struct

import numpy as np

from core.dictionary import PowerDictionary, build_grid, center
from core.errors import DictionaryError

logger = logging.getLogger(__name__)

MAGIC = b"PWRDICT1"
_LENGTH = struct.Struct("<I")
_REQUIRED_KEYS = ("num_cells", "num_angles", "grid", "fingerprint", "lipschitz", "spectral_norm_sq")


def _grid_text(grid):
    return (f"[{math.degrees(grid.min):.4g}, {math.degrees(grid.max):.4g}] deg "
            f"step {math.degrees(grid.spacing):.4g} deg")


class DictionaryStore:
    """
    Handles loading and saving power dictionaries.
    """

    def __init__(self):
        """Initialize the store."""
        self.dictionary = None
        self.filename = None
        self.header = None
        self.is_loaded = False

    def save(self, filepath, dictionary):
        """
        Write a dictionary to disk.

        Args:
            filepath (str): Destination path
            dictionary (PowerDictionary): Dictionary to store
        """
        header = {
            "num_cells": dictionary.num_cells,
            "num_angles": dictionary.num_angles,
            "grid": dictionary.grid.to_dict(),
            "fingerprint": dictionary.fingerprint,
            "lipschitz": float(dictionary.lipschitz),
            "spectral_norm_sq": float(dictionary.spectral_norm_sq),
        }
        encoded = json.dumps(header, sort_keys=True).encode("utf-8")
        payload = np.ascontiguousarray(dictionary.atoms, dtype="<f8")

        directory = os.path.dirname(os.path.abspath(filepath))
        os.makedirs(directory, exist_ok=True)
        with open(filepath, "wb") as handle:
            handle.write(MAGIC)
            handle.write(_LENGTH.pack(len(encoded)))
            handle.write(encoded)
            handle.write(payload.tobytes(order="C"))

        self.dictionary = dictionary
        self.filename = os.path.basename(filepath)
        self.header = header
        self.is_loaded = True
        logger.info("Saved dictionary cache %s (%s)", filepath, dictionary.get_summary())

    def load(self, filepath, receiver=None, grid=None):
        """
        Load a dictionary from disk.

        Args:
            filepath (str): Path of the cache file
            receiver (ReceiverSpec, optional): When given, the cached
                fingerprint must match this receiver
            grid (AoaGrid, optional): When given, the cached grid must match it

        Returns:
            PowerDictionary: The cached dictionary with centered atoms recomputed

        Raises:
            DictionaryError: On a missing, malformed or mismatched file
        """
        if not os.path.exists(filepath):
            raise DictionaryError(f"dictionary cache not found: {filepath}")

        with open(filepath, "rb") as handle:
            raw = handle.read()

        if raw[:len(MAGIC)] != MAGIC:
            raise DictionaryError(f"{filepath} is not a power-dictionary cache")
        offset = len(MAGIC)
        if len(raw) < offset + _LENGTH.size:
            raise DictionaryError(f"{filepath} is truncated")
        (length,) = _LENGTH.unpack_from(raw, offset)
        offset += _LENGTH.size
        try:
            header = json.loads(raw[offset:offset + length].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise DictionaryError(f"unreadable dictionary header in {filepath}: {e}") from e
        offset += length

        self._validate_header(header, receiver)

        num_cells, num_angles = header["num_cells"], header["num_angles"]
        expected = num_cells * num_angles * 8
        if len(raw) - offset != expected:
            raise DictionaryError(
                f"{filepath} holds {len(raw) - offset} payload bytes, expected {expected}"
            )
        atoms = np.frombuffer(raw, dtype="<f8", count=num_cells * num_angles, offset=offset)
        atoms = atoms.reshape(num_cells, num_angles).astype(float)

        grid_info = header["grid"]
        cached_grid = build_grid(grid_info["min"], grid_info["max"], grid_info["spacing"])
        if len(cached_grid) != num_angles:
            raise DictionaryError(
                f"grid parameters give {len(cached_grid)} angles but the cache holds {num_angles}"
            )
        if grid is not None and not cached_grid.matches(grid):
            raise DictionaryError(
                f"cached dictionary covers {_grid_text(cached_grid)}, expected {_grid_text(grid)}"
            )

        self.dictionary = PowerDictionary(
            atoms=atoms,
            centered=center(atoms),
            grid=cached_grid,
            lipschitz=float(header["lipschitz"]),
            spectral_norm_sq=float(header["spectral_norm_sq"]),
            fingerprint=header["fingerprint"],
        )
        self.filename = os.path.basename(filepath)
        self.header = header
        self.is_loaded = True
        logger.info("Loaded dictionary cache %s (%s)", filepath, self.dictionary.get_summary())
        return self.dictionary

    def _validate_header(self, header, receiver):
        """
        Check the header keys and, if requested, the receiver fingerprint.

        Raises:
            DictionaryError: If a key is missing or the fingerprint differs
        """
        missing = [key for key in _REQUIRED_KEYS if key not in header]
        if missing:
            raise DictionaryError(f"dictionary header is missing: {', '.join(missing)}")
        if receiver is not None and header["fingerprint"] != receiver.fingerprint():
            raise DictionaryError(
                "cached dictionary was built for a different lens/array/dipole "
                f"(fingerprint {header['fingerprint'][:12]}..., "
                f"expected {receiver.fingerprint()[:12]}...)"
            )

    def get_dictionary(self):
        """
        Get the loaded dictionary.

        Returns:
            PowerDictionary: The dictionary, or None if nothing is loaded
        """
        return self.dictionary if self.is_loaded else None

    def get_summary(self):
        """
        Get a summary of the loaded dictionary.

        Returns:
            dict: Summary values, or empty dict if nothing is loaded
        """
        if not self.is_loaded:
            return {}

        grid = self.dictionary.grid
        return {
            "filename": self.filename,
            "num_cells": self.dictionary.num_cells,
            "num_angles": self.dictionary.num_angles,
            "grid_deg": (math.degrees(grid.min), math.degrees(grid.max), math.degrees(grid.spacing)),
            "lipschitz": self.dictionary.lipschitz,
            "fingerprint": self.dictionary.fingerprint,
        }
