from django.urls import path

from . import views

app_name = "capacitance"

urlpatterns = [
    path("runs/", views.run_list, name="run_list"),
    path("runs/<int:run_id>/", views.run_detail, name="run_detail"),
    path("runs/<int:run_id>/<str:tier>.csv", views.run_csv, name="run_csv"),
    path("runs/<int:run_id>/pdf/", views.run_pdf, name="run_pdf"),

    path("api/solve/", views.api_solve, name="api_solve"),
]
