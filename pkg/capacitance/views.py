from __future__ import annotations

import json
import logging

from django.http import HttpResponse, JsonResponse
from django.shortcuts import get_object_or_404
from django.views.decorators.http import require_GET, require_POST

from .exceptions import CapacitanceError, ConductorCountError
from .exports import build_run_pdf, convergence_frame
from .geometry import load_geometry
from .kernels import DEFAULT_TIER, KernelTier
from .models import SolverRun
from .solver import charge_map, extract

logger = logging.getLogger(__name__)


def _json_body(request):
    try:
        return json.loads(request.body.decode("utf-8") or "{}")
    except (UnicodeDecodeError, json.JSONDecodeError):
        return None


@require_GET
def run_list(request):
    runs = SolverRun.objects.all()[:100]
    return JsonResponse({"ok": True, "runs": [
        {k: v for k, v in run.as_dict().items() if k not in ("config", "summary")} for run in runs
    ]})


@require_GET
def run_detail(request, run_id: int):
    run = get_object_or_404(SolverRun, pk=run_id)
    payload = run.as_dict()
    payload["points"] = [p.as_dict() for p in run.points.all()]
    return JsonResponse({"ok": True, "run": payload})


@require_GET
def run_csv(request, run_id: int, tier: str):
    run = get_object_or_404(SolverRun, pk=run_id)
    points = list(run.points.filter(tier=tier).order_by("n"))
    if not points:
        return JsonResponse({"ok": False, "error": f"No {tier} points in this run."}, status=404)

    resp = HttpResponse(content_type="text/csv")
    convergence_frame([p.to_record() for p in points]).to_csv(resp, index=False, float_format="%.17g")
    resp["Content-Disposition"] = f'attachment; filename="run_{run.pk}_{tier}.csv"'
    return resp


@require_GET
def run_pdf(request, run_id: int):
    run = get_object_or_404(SolverRun, pk=run_id)
    pdf_bytes = build_run_pdf(run=run, points=list(run.points.order_by("tier", "n")))

    resp = HttpResponse(pdf_bytes, content_type="application/pdf")
    resp["Content-Disposition"] = f'attachment; filename="capacitance_run_{run.pk}.pdf"'
    return resp


@require_POST
def api_solve(request):
    """Solve a geometry document; optional ``tier`` next to ``panels``."""
    body = _json_body(request)
    if not isinstance(body, dict):
        return JsonResponse({"ok": False, "error": "Body must be a JSON object."}, status=400)

    try:
        tier = KernelTier.parse(body.get("tier") or DEFAULT_TIER)
        mesh = load_geometry(body)
        if len(mesh.conductors) > 2:
            raise ConductorCountError(len(mesh.conductors))
        extraction = extract(mesh, tier)
    except CapacitanceError as exc:
        logger.info("Rejected solve request: %s", exc)
        return JsonResponse({"ok": False, "error": str(exc)}, status=400)

    summary = extraction.result.summary()
    summary["tier"] = tier.value
    summary["assembly_s"] = extraction.assembly_seconds
    summary["solve_s"] = extraction.solve_seconds
    return JsonResponse({
        "ok": True,
        "summary": summary,
        "charges": [
            {"center": list(r.center), "area": r.area, "charge_C": r.charge, "density_C_per_m2": r.density}
            for r in charge_map(extraction.result, mesh)
        ],
    })
