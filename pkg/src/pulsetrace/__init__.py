"""Streaming rPPG: facial colour/pose traces to BVP, beats, heart rate and HRV."""

__version__ = "0.1.0"
