"""triagekit: adaptive triage engine with forest-driven question sequencing."""

__version__ = "0.1.0"
