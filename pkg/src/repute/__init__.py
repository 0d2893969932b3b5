"""Reputation generation from customer reviews.

The package turns an entity's reviews (text, rating, helpfulness votes,
posting year, author statistics) into one reputation value plus a report.
See :mod:`repute.pipelines` for the four available pipelines.
"""

__version__ = "0.1.0"
