from django.contrib import admin
from django.urls import path, include
from drf_spectacular.views import SpectacularAPIView, SpectacularSwaggerView, SpectacularRedocView

from apps.experiments.urls import health_urlpatterns

urlpatterns = [
    path('admin/', admin.site.urls),
    path('api/v1/', include(health_urlpatterns)),
    path('api/v1/experiments/', include('apps.experiments.urls')),
    path('api/schema/', SpectacularAPIView.as_view(), name='schema'),
    path('api/docs/', SpectacularSwaggerView.as_view(url_name='schema'), name='swagger-ui'),
    path('api/redoc/', SpectacularRedocView.as_view(url_name='schema'), name='redoc'),
]

admin.site.site_header = "oraclenet Simulation Admin"
admin.site.site_title = "oraclenet"
admin.site.index_title = "Oracle simulation runs"
