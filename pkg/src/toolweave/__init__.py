"""Synthesis pipeline and evaluation harness for personalized tool invocation.

The package generates tool libraries, user profiles, and profile-dependent
query/solution pairs with LLM agents, verifies them in two tiers, and scores
candidate model outputs with exact-match accuracy metrics and an error
taxonomy.
"""

__version__ = "0.1.0"
