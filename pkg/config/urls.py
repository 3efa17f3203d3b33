from django.contrib import admin
from django.shortcuts import redirect
from django.urls import include, path


def root_redirect(_request):
    return redirect("/capacitance/runs/")


urlpatterns = [
    path("admin/", admin.site.urls),
    path("capacitance/", include("capacitance.urls")),
    path("", root_redirect),
]
